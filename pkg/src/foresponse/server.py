"""Local WebSocket endpoint plus same-origin static file serving for the
companion UI.

Protocol (JSON text frames):
  client -> server   {"id": <any>, "cmd": <name>, "params": {...}}
  server -> client   {"id": <any>, "ok": true, "payload": {...}}
                     {"id": <any>, "ok": false, "error": {"kind", "message"}}
  server -> client   {"event": {...,"seq": n}}   pushed, seq strictly increasing

Plain HTTP GETs on the same port serve files from the UI bundle directory,
so the browser client is same-origin with the socket.
"""

from __future__ import annotations

import asyncio
import http
import json
import mimetypes
from pathlib import Path

from websockets.asyncio.server import serve
from websockets.datastructures import Headers
from websockets.http11 import Response

from .service import ExperimentService


def _static_response(connection, request, root: Path):
    if request.headers.get("Upgrade", "").lower() == "websocket":
        return None
    path = request.path.split("?")[0]
    if path in ("/", ""):
        path = "/index.html"
    target = (root / path.lstrip("/")).resolve()
    try:
        target.relative_to(root.resolve())
    except ValueError:
        return connection.respond(http.HTTPStatus.FORBIDDEN, "forbidden\n")
    if not target.is_file():
        return connection.respond(http.HTTPStatus.NOT_FOUND, "not found\n")
    body = target.read_bytes()
    ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
    headers = Headers({"Content-Type": ctype,
                       "Content-Length": str(len(body))})
    return Response(http.HTTPStatus.OK, "OK", headers, body)


async def _client_session(websocket, service: ExperimentService):
    cursor = 0

    async def pump_events():
        nonlocal cursor
        while True:
            events = await asyncio.to_thread(service.wait_events, cursor, 0.25)
            for event in events:
                cursor = max(cursor, event["seq"] + 1)
                await websocket.send(json.dumps({"event": event}))

    pump = asyncio.create_task(pump_events())
    try:
        async for raw in websocket:
            try:
                msg = json.loads(raw)
            except json.JSONDecodeError:
                await websocket.send(json.dumps(
                    {"id": None, "ok": False,
                     "error": {"kind": "bad-json", "message": "unparseable"}}))
                continue
            reply = await asyncio.to_thread(service.handle_message, msg)
            await websocket.send(json.dumps(reply))
    finally:
        pump.cancel()


async def run_server(service: ExperimentService, host: str = "127.0.0.1",
                     port: int = 8765, ui_root: str | None = None,
                     ready_event=None):
    root = Path(ui_root) if ui_root else Path(__file__).parent / "ui_dist"

    async def handler(websocket):
        await _client_session(websocket, service)

    async with serve(handler, host, port,
                     process_request=lambda c, r: _static_response(c, r, root)) as server:
        if ready_event is not None:
            ready_event.set()
        await server.serve_forever()


def serve_forever(service: ExperimentService, host: str = "127.0.0.1",
                  port: int = 8765, ui_root: str | None = None):
    asyncio.run(run_server(service, host, port, ui_root))
