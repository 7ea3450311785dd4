// Application wiring: one service connection, the control panel on the
// left, pitch indicator and analysis graphs on the right.  Rendering is
// rate-limited to the display refresh; stale events never repaint.

import { ServiceClient, ServiceEvent, ServiceState } from "./protocol.js";
import { defaultState } from "./state.js";
import { ControlPanel } from "./control_panel.js";
import {
  IndicatorLayout, MarkerState, markerState, renderIndicator,
} from "./pitch_indicator.js";
import { AnalysisView, renderAnalysis, viewFromReply } from "./analysis_view.js";
import {
  DiagnosticsModel, TrajectoryBlock, diagnosticsModel, renderDiagnostics,
} from "./diagnostics_view.js";

const INDICATOR_LAYOUT: IndicatorLayout = { height: 320, rangeCents: 1400 };

class App {
  private client: ServiceClient;
  private panel: ControlPanel;
  private state: ServiceState = defaultState();
  private marker: MarkerState = { visible: false, y: null, cents: null };
  private analysisView: AnalysisView = {
    kind: "prompt", message: "Save the recording to see its analysis.",
  };
  private diagnostics: DiagnosticsModel | null = null;
  private banner: HTMLElement;
  private pitchCanvas: HTMLCanvasElement;
  private diagnosticsCanvas: HTMLCanvasElement;
  private analysisCanvas: HTMLCanvasElement;
  private dirty = true;

  constructor(root: HTMLElement, url: string) {
    this.client = new ServiceClient(url);
    this.panel = new ControlPanel({
      onCommand: (cmd, params) => this.command(cmd, params),
      onSpecChange: (update) => this.command("set_spec", update),
    });

    this.banner = document.createElement("div");
    this.banner.className = "banner";
    this.banner.textContent = "connecting…";
    this.pitchCanvas = canvas(240, INDICATOR_LAYOUT.height, "pitch");
    this.diagnosticsCanvas = canvas(640, 200, "diagnostics");
    this.analysisCanvas = canvas(640, 320, "analysis");

    const right = document.createElement("div");
    right.className = "display-panel";
    right.append(this.diagnosticsCanvas, this.analysisCanvas);
    root.append(this.banner, this.panel.element, this.pitchCanvas, right);

    this.client.onStatusChange = (connected) => {
      this.banner.textContent = connected ? "" : "service disconnected";
      this.banner.classList.toggle("hidden", connected);
      if (connected) {
        void this.refreshState();
      }
    };
    this.client.onEvent = (event) => this.handleEvent(event);

    const paint = () => {
      if (this.dirty) {
        this.dirty = false;
        this.render();
      }
      requestAnimationFrame(paint);
    };
    requestAnimationFrame(paint);
  }

  private async command(cmd: string, params?: Record<string, unknown>): Promise<void> {
    if (cmd === "update_settings" && !params?.path) {
      const path = window.prompt("Condition file path on the service host:");
      if (!path) {
        return;
      }
      params = { path };
    }
    const reply = await this.client.call(cmd, params ?? {});
    if (cmd === "get_analysis") {
      this.analysisView = viewFromReply(reply);
      const result = reply.payload?.result as
        | { trajectories?: TrajectoryBlock; voiced_span?: [number, number] }
        | undefined;
      this.diagnostics = result
        ? diagnosticsModel(result.trajectories, result.voiced_span ?? [0, 0])
        : null;
    } else if (!reply.ok) {
      this.banner.textContent = `${reply.error?.kind}: ${reply.error?.message}`;
      this.banner.classList.remove("hidden");
    }
    await this.refreshState();
  }

  private async refreshState(): Promise<void> {
    const reply = await this.client.call("get_state");
    if (reply.ok && reply.payload) {
      this.state = reply.payload as unknown as ServiceState;
      this.panel.update(this.state);
      this.dirty = true;
    }
  }

  private handleEvent(event: ServiceEvent): void {
    switch (event.type) {
      case "pitch": {
        const foHz = (event.fo_hz as number | null) ?? null;
        this.marker = markerState(
          { foHz, voiced: Boolean(event.voiced) },
          this.state.spec.target_fo, INDICATOR_LAYOUT);
        this.dirty = true;
        break;
      }
      case "elapsed":
        this.panel.setElapsed(event.seconds as number);
        break;
      case "completed":
        void this.refreshState();
        break;
      case "analysis_ready":
        void this.command("get_analysis", { artifact: event.artifact });
        break;
      case "meter":
        this.banner.textContent =
          `level ${(event.rms_dbfs as number).toFixed(1)} dBFS`;
        this.banner.classList.remove("hidden");
        break;
    }
  }

  private render(): void {
    const pitchCtx = this.pitchCanvas.getContext("2d");
    if (pitchCtx) {
      renderIndicator(pitchCtx, this.pitchCanvas.width, INDICATOR_LAYOUT,
                      this.marker);
    }
    const analysisCtx = this.analysisCanvas.getContext("2d");
    if (analysisCtx) {
      renderAnalysis(analysisCtx,
                     { width: this.analysisCanvas.width,
                       height: this.analysisCanvas.height },
                     this.analysisView);
    }
    const diagCtx = this.diagnosticsCanvas.getContext("2d");
    if (diagCtx) {
      renderDiagnostics(diagCtx,
                        { width: this.diagnosticsCanvas.width,
                          height: this.diagnosticsCanvas.height },
                        this.diagnostics);
    }
  }
}

function canvas(width: number, height: number, cls: string): HTMLCanvasElement {
  const el = document.createElement("canvas");
  el.width = width;
  el.height = height;
  el.className = cls;
  return el;
}

const root = document.getElementById("app");
if (root) {
  const url = `ws://${location.host || "127.0.0.1:8765"}/ws`;
  new App(root, url);
}
