"""WebSocket service: routes protocol messages to the session and runs the
60 Hz tick loop. Also serves the model file and the operator-console assets.
"""

from __future__ import annotations

import asyncio
import time
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import HTMLResponse, PlainTextResponse, Response

from . import protocol as proto
from .config import ServerConfig
from .errors import BindError, CodecError
from .paths import model_path
from .session import LatencyHarness, Session, build_session

_FALLBACK_PAGE = """<!doctype html>
<html><head><title>otv server</title></head>
<body><h1>otv teleoperation server</h1>
<p>No console build found. Build the frontend (see frontend/README.md) or
connect a protocol client to <code>/ws</code>.</p></body></html>
"""


class Hub:
    """Connection registry + tick loop around a single session."""

    def __init__(self, session: Session, config: ServerConfig,
                 frontend_dir: Path | None = None):
        self.session = session
        self.config = config
        self.clients: dict[WebSocket, str] = {}
        self.operator: WebSocket | None = None
        self.frontend_dir = frontend_dir
        lat = config.latency
        self.lat_in: LatencyHarness | None = None
        self.lat_out: LatencyHarness | None = None
        if lat.delay_ms > 0 or lat.jitter_ms > 0:
            self.lat_in = LatencyHarness(lat.delay_ms, lat.jitter_ms, lat.seed)
            self.lat_out = LatencyHarness(lat.delay_ms, lat.jitter_ms, lat.seed + 1)
        self._stop = asyncio.Event()

    # -- connection handling ------------------------------------------------------

    async def handshake(self, ws: WebSocket) -> str | None:
        raw = await ws.receive_bytes()
        try:
            msg = proto.decode_message(raw)
        except CodecError as e:
            await ws.send_bytes(proto.encode_message(
                proto.ControlMsg({"cmd": "error", "error": f"bad hello: {e}"})))
            return None
        if not isinstance(msg, proto.HelloMsg):
            await ws.send_bytes(proto.encode_message(
                proto.ControlMsg({"cmd": "error", "error": "expected HELLO first"})))
            return None
        role = msg.data.get("role", "viewer")
        if role not in ("operator", "viewer"):
            await ws.send_bytes(proto.encode_message(
                proto.ControlMsg({"cmd": "error", "error": f"bad role {role!r}"})))
            return None
        if role == "operator" and self.operator is not None:
            await ws.send_bytes(proto.encode_message(proto.ControlMsg(
                {"cmd": "error", "error": "an operator is already connected"})))
            return None
        if role == "operator":
            self.operator = ws
        self.clients[ws] = role
        await ws.send_bytes(proto.encode_message(proto.HelloMsg({
            "ok": True,
            "role": role,
            "protocol_version": proto.PROTOCOL_VERSION,
            "robot": self.session.model.name,
            "action_dim": self.session.model.action_dim,
            "rate_hz": self.config.rate_hz,
        })))
        return role

    def disconnect(self, ws: WebSocket) -> None:
        self.clients.pop(ws, None)
        if self.operator is ws:
            self.operator = None

    async def handle_client(self, ws: WebSocket) -> None:
        await ws.accept()
        role = None
        try:
            role = await self.handshake(ws)
            if role is None:
                await ws.close()
                return
            while True:
                raw = await ws.receive_bytes()
                try:
                    msg = proto.decode_message(raw)
                except CodecError as e:
                    await ws.send_bytes(proto.encode_message(
                        proto.ControlMsg({"cmd": "error", "error": str(e)})))
                    continue
                if isinstance(msg, proto.OperatorFrameMsg):
                    if role != "operator":
                        continue  # viewers' frames are ignored
                    if self.lat_in is not None:
                        self.lat_in.inject(msg, time.monotonic())
                    else:
                        self.session.deliver_operator_frame(msg)
                elif isinstance(msg, proto.ControlMsg):
                    reply = self.session.handle_control(msg.data)
                    await ws.send_bytes(proto.encode_message(proto.ControlMsg(reply)))
        except WebSocketDisconnect:
            pass
        finally:
            self.disconnect(ws)

    # -- tick loop -------------------------------------------------------------------

    async def broadcast(self, messages) -> None:
        if not self.clients:
            return
        raws = [proto.encode_message(m) for m in messages]
        dead = []
        for ws in list(self.clients):
            try:
                for raw in raws:
                    await ws.send_bytes(raw)
            except Exception:
                dead.append(ws)
        for ws in dead:
            self.disconnect(ws)

    async def tick_loop(self) -> None:
        period = 1.0 / self.config.rate_hz
        start = time.monotonic()
        n = 0
        while not self._stop.is_set():
            now = time.monotonic()
            if self.lat_in is not None:
                for msg in self.lat_in.drain(now):
                    self.session.deliver_operator_frame(msg)
            out = self.session.tick()
            if self.lat_out is not None:
                self.lat_out.inject(out, now)
                due = []
                for batch in self.lat_out.drain(time.monotonic()):
                    due += batch
                await self.broadcast(due)
            else:
                await self.broadcast(out)
            n += 1
            target = start + n * period
            delay = target - time.monotonic()
            if delay > 0:
                await asyncio.sleep(delay)
            elif delay < -1.0:
                start = time.monotonic()  # fell far behind; re-anchor
                n = 0

    def stop(self) -> None:
        self._stop.set()


def create_app(config: ServerConfig, session: Session | None = None,
               record_root=None, record_frames: bool = False,
               frontend_dir: Path | None = None, auto_tick: bool = True) -> FastAPI:
    if session is None:
        session = build_session(config, record_root=record_root,
                                record_frames=record_frames,
                                created=time.time())
    hub = Hub(session, config, frontend_dir)

    from contextlib import asynccontextmanager

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        task = asyncio.create_task(hub.tick_loop()) if auto_tick else None
        yield
        hub.stop()
        if task is not None:
            task.cancel()
        session.stop_recording()

    app = FastAPI(lifespan=lifespan)
    app.state.hub = hub

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await hub.handle_client(ws)

    @app.get("/model")
    async def get_model():
        return PlainTextResponse(model_path(config.robot_model).read_text())

    @app.get("/")
    async def index():
        if frontend_dir is not None:
            page = frontend_dir / "index.html"
            if page.exists():
                return HTMLResponse(page.read_text())
        return HTMLResponse(_FALLBACK_PAGE)

    @app.get("/static/{path:path}")
    async def static(path: str):
        if frontend_dir is None:
            return Response(status_code=404)
        target = (frontend_dir / path).resolve()
        if not str(target).startswith(str(frontend_dir.resolve())) or not target.is_file():
            return Response(status_code=404)
        media = "text/javascript" if target.suffix == ".js" else "text/plain"
        if target.suffix == ".css":
            media = "text/css"
        if target.suffix == ".html":
            media = "text/html"
        return Response(target.read_bytes(), media_type=media)

    return app


def default_frontend_dir() -> Path | None:
    candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    return candidate if candidate.exists() else None


def run_server(config: ServerConfig, record_root=None, record_frames=False) -> None:
    """Blocking entry point; raises BindError when the port is unavailable."""
    import uvicorn

    app = create_app(config, record_root=record_root, record_frames=record_frames,
                     frontend_dir=default_frontend_dir())
    try:
        uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    except OSError as e:
        raise BindError(f"cannot bind {config.host}:{config.port}: {e}") from None
