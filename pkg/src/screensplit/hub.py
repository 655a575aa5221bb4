"""Session relay pairing one master and one slave connection.

One websocket endpoint serves all sessions: the first message on a
connection is a Hello carrying the session token and role. Messages relay
verbatim to the session peer, FIFO, buffered while the peer is absent.
The hub also serves the split artifacts and the runtime scripts so a demo
needs a single process, and answers split-requests engine-side from the
artifacts it serves.
"""

from __future__ import annotations

import asyncio
import logging
from collections import deque
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, JSONResponse, PlainTextResponse

from . import protocol
from .dom import parse_html
from .mapping import geometry_from_json, query_from_json
from .protocol import SyncMessage
from .splitter import runtime_split_request

log = logging.getLogger(__name__)

BUFFER_LIMIT = 1024

WAITING_MASTER = "WaitingMaster"
WAITING_SLAVE = "WaitingSlave"
PAIRED = "Paired"
CLOSED = "Closed"


class Session:
    def __init__(self, session_id: str):
        self.id = session_id
        self.connections: dict[str, WebSocket | None] = {"master": None,
                                                         "slave": None}
        self.buffers: dict[str, deque[str]] = {"master": deque(), "slave": deque()}
        self.seq_watermarks: dict[str, int] = {}
        self.lock = asyncio.Lock()
        self.state = WAITING_MASTER
        # engine-side view of the served master document, for split requests
        self.engine_doc = None
        self.geometry = {}

    def _update_state(self):
        if self.state == CLOSED:
            return
        master, slave = self.connections["master"], self.connections["slave"]
        if master is not None and slave is not None:
            self.state = PAIRED
        elif master is not None:
            self.state = WAITING_SLAVE
        else:
            self.state = WAITING_MASTER

    async def attach(self, role: str, ws: WebSocket) -> bool:
        async with self.lock:
            if self.state == CLOSED or self.connections[role] is not None:
                return False
            self.connections[role] = ws
            self._update_state()
            backlog = self.buffers[role]
            while backlog:
                await ws.send_text(backlog.popleft())
            log.info("session %s: %s connected (%s)", self.id, role, self.state)
            return True

    async def detach(self, role: str):
        async with self.lock:
            self.connections[role] = None
            self._update_state()
            log.info("session %s: %s disconnected (%s)", self.id, role, self.state)

    async def deliver(self, to_role: str, raw: str) -> bool:
        """Forward raw wire text to one role, buffering while absent.
        Returns False when the bounded buffer overflows."""
        async with self.lock:
            ws = self.connections[to_role]
            if ws is not None:
                try:
                    await ws.send_text(raw)
                    return True
                except Exception:
                    self.connections[to_role] = None
                    self._update_state()
            if len(self.buffers[to_role]) >= BUFFER_LIMIT:
                return False
            self.buffers[to_role].append(raw)
            return True

    async def close(self, reason: str):
        async with self.lock:
            self.state = CLOSED
            bye = protocol.encode(SyncMessage(
                session=self.id, seq=0, kind=protocol.BYE,
                payload={"reason": reason})).decode().rstrip("\n")
            for role, ws in self.connections.items():
                if ws is None:
                    continue
                try:
                    await ws.send_text(bye)
                    await ws.close()
                except Exception:
                    pass
                self.connections[role] = None
            log.info("session %s: closed (%s)", self.id, reason)


class Hub:
    def __init__(self, artifact_dir: str | Path | None = None,
                 runtime_dir: str | Path | None = None,
                 region_threshold: float = 0.5):
        self.artifact_dir = Path(artifact_dir) if artifact_dir else None
        self.runtime_dir = Path(runtime_dir) if runtime_dir else None
        self.region_threshold = region_threshold
        self.sessions: dict[str, Session] = {}

    def session(self, session_id: str) -> Session:
        if session_id not in self.sessions:
            self.sessions[session_id] = Session(session_id)
        return self.sessions[session_id]

    def _engine_doc(self, session: Session):
        if session.engine_doc is None and self.artifact_dir is not None:
            master_file = self.artifact_dir / "master.html"
            if master_file.exists():
                session.engine_doc = parse_html(master_file.read_bytes())
        return session.engine_doc

    async def handle(self, session: Session, role: str, raw: str,
                     msg: SyncMessage):
        previous = session.seq_watermarks.get(role, 0)
        if msg.seq > previous:
            session.seq_watermarks[role] = msg.seq

        if msg.kind == protocol.GEOMETRY and role == "master":
            session.geometry = geometry_from_json(msg.payload)
            return
        if msg.kind == protocol.SPLIT_REQUEST and role == "master":
            await self._engine_split(session, msg)
            return

        peer = "slave" if role == "master" else "master"
        if not await session.deliver(peer, raw):
            await session.close("buffer overflow")
            self.sessions.pop(session.id, None)

    async def _engine_split(self, session: Session, msg: SyncMessage):
        doc = self._engine_doc(session)
        if doc is None:
            log.warning("session %s: split_request without engine document",
                        session.id)
            return
        try:
            query = query_from_json(msg.payload)
            result = runtime_split_request(doc, query, session.geometry,
                                           threshold=self.region_threshold,
                                           session_id=session.id)
        except Exception as exc:
            log.warning("session %s: split_request failed: %s", session.id, exc)
            return
        session.engine_doc = result.split.master
        watermark = session.seq_watermarks.get("hub", 0)
        if result.master_annotation_changes:
            watermark += 1
            raw = protocol.encode(SyncMessage(
                session=session.id, seq=watermark, kind=protocol.CHANGES,
                payload={"records": result.master_annotation_changes},
            )).decode().rstrip("\n")
            await session.deliver("master", raw)
        if result.slave_changes:
            watermark += 1
            raw = protocol.encode(protocol.changes_message(
                session.id, watermark, result.slave_changes)).decode().rstrip("\n")
            await session.deliver("slave", raw)
        session.seq_watermarks["hub"] = watermark
        log.info("session %s: split_request applied", session.id)


def create_app(artifact_dir: str | Path | None = None,
               runtime_dir: str | Path | None = None,
               region_threshold: float = 0.5) -> FastAPI:
    hub = Hub(artifact_dir=artifact_dir, runtime_dir=runtime_dir,
              region_threshold=region_threshold)
    app = FastAPI(title="screensplit hub")
    app.state.hub = hub

    @app.get("/healthz")
    async def healthz():
        return JSONResponse({"status": "ok"})

    def _serve_file(base: Path | None, name: str, media_type: str | None = None):
        if base is None:
            return PlainTextResponse("not serving artifacts", status_code=404)
        path = (base / name).resolve()
        if not str(path).startswith(str(base.resolve())) or not path.is_file():
            return PlainTextResponse("not found", status_code=404)
        return FileResponse(path, media_type=media_type)

    @app.get("/app/{name}")
    async def app_file(name: str):
        media = "text/html" if name.endswith(".html") else None
        return _serve_file(hub.artifact_dir, name, media)

    @app.get("/runtime/{name}")
    async def runtime_file(name: str):
        return _serve_file(hub.runtime_dir, name, "application/javascript")

    @app.websocket("/sync")
    async def sync(ws: WebSocket):
        await ws.accept()
        try:
            raw = await ws.receive_text()
        except WebSocketDisconnect:
            return
        try:
            hello = protocol.decode(raw)
            if hello.kind != protocol.HELLO:
                raise protocol.ProtocolError("first message must be hello")
        except protocol.ProtocolError as exc:
            await ws.close(code=1002, reason=str(exc)[:100])
            return
        role = hello.payload["role"]
        session = hub.session(hello.session)
        if not await session.attach(role, ws):
            await ws.close(code=1008, reason=f"{role} already connected")
            return
        await hub.handle(session, role, raw, hello)  # peer learns we are here
        try:
            while session.state != CLOSED:
                raw = await ws.receive_text()
                try:
                    msg = protocol.decode(raw)
                except protocol.ProtocolError as exc:
                    log.warning("session %s: dropping bad message from %s: %s",
                                session.id, role, exc)
                    continue
                await hub.handle(session, role, raw, msg)
        except (WebSocketDisconnect, RuntimeError):
            await session.detach(role)

    return app
