// B3 against a live service: the analysis view refuses to render for an
// unsaved recording when talking to the real backend over its socket.
// Spawns the Python service with the simulated device; skips when the
// backend is not importable in this environment.

import test from "node:test";
import assert from "node:assert/strict";
import { spawn, spawnSync, ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import WebSocket from "ws";

import { ServiceClient, WebSocketFactory } from "../src/protocol.js";
import { viewFromReply } from "../src/analysis_view.js";

const PYTHON = process.env.FORESPONSE_PYTHON ?? "python3";
const PORT = 18930 + (process.pid % 100);

function backendAvailable(): boolean {
  const probe = spawnSync(PYTHON, ["-c", "import foresponse"], { timeout: 20000 });
  return probe.status === 0;
}

function startService(): Promise<ChildProcess> {
  const storage = mkdtempSync(join(tmpdir(), "foresponse-ui-test-"));
  const proc = spawn(PYTHON, [
    "-m", "foresponse.cli", "serve", "--port", String(PORT),
    "--storage", storage,
  ]);
  return new Promise((resolve, reject) => {
    const timer = setTimeout(() => {
      proc.kill();
      reject(new Error("service start timeout"));
    }, 20000);
    proc.stdout?.on("data", (chunk: Buffer) => {
      if (chunk.toString().includes("serving on")) {
        clearTimeout(timer);
        resolve(proc);
      }
    });
    proc.on("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`service exited early (${code})`));
    });
  });
}

const nodeFactory: WebSocketFactory = (url) => {
  const ws = new WebSocket(url);
  return {
    send: (data: string) => ws.send(data),
    close: () => ws.close(),
    set onmessage(fn) { ws.onmessage = fn as never; },
    get onmessage() { return null; },
    set onopen(fn) { ws.onopen = fn as never; },
    get onopen() { return null; },
    set onclose(fn) { ws.onclose = fn as never; },
    get onclose() { return null; },
    set onerror(fn) { ws.onerror = fn as never; },
    get onerror() { return null; },
  };
};

test("unsaved recordings cannot be rendered from a live service",
     { skip: !backendAvailable() }, async () => {
  const proc = await startService();
  try {
    const client = await new Promise<ServiceClient>((resolve, reject) => {
      const c = new ServiceClient(`ws://127.0.0.1:${PORT}/ws`, nodeFactory);
      c.onStatusChange = (connected) =>
        connected ? resolve(c) : reject(new Error("connect failed"));
    });

    const state = await client.call("get_state");
    assert.equal(state.ok, true);
    assert.equal((state.payload as { phase: string }).phase, "uncalibrated");

    const analysis = await client.call("get_analysis");
    assert.equal(analysis.ok, false);
    assert.equal(analysis.error?.kind, "not-saved");

    const view = viewFromReply(analysis);
    assert.equal(view.kind, "prompt", "view must refuse to plot unsaved data");

    client.close();
  } finally {
    proc.kill();
  }
});
