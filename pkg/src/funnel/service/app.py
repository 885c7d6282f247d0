"""FastAPI application exposing the whole service surface.

Endpoints:

* ``WS /signal``   join/offer/answer/candidate/bye relay (JSON messages)
* ``POST /api/command`` co-host interaction commands; also over ``WS /relay``
* ``POST /api/chat`` + ``GET /api/chat`` + ``WS /chat`` public ledger
* ``POST /api/audio`` co-host test audio (routed privately to the headset)
* ``GET /api/tablet`` headset tablet view (vr-host token)
* ``GET /api/state`` public diagnostics
* ``WS /media``    binary frame records: broadcast at full rate, preset
  thumbnails interleaved
* ``GET /live/{rung}/playlist.json`` and ``GET /live/{rung}/seg/{n}``
* ``GET /`` co-host console, ``GET /spectator`` spectator page
"""

from __future__ import annotations

import asyncio
import base64
import binascii
import json
import logging
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, Query, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, JSONResponse, PlainTextResponse, Response

from ..config import Config
from ..fanout import SegmentGone, SegmentNotYet
from ..session import AudioPacket, AuthError, Role, ValidationError
from .models import (
    AudioPostRequest,
    AudioPostResponse,
    ChatLedgerResponse,
    ChatPostRequest,
    ChatPostResponse,
    CommandRequest,
    CommandResponse,
    LiveStats,
    StateSummary,
    TabletResponse,
)
from .runtime import SIM_HOST_ID, Engine, LiveRunner

log = logging.getLogger("funnel.app")

FRONTEND_DIR = Path(__file__).resolve().parents[3] / "frontend" / "dist"


class Hub:
    """Connection registries and broadcast plumbing around one engine."""

    def __init__(self, engine: Engine):
        self.engine = engine
        self.runner = LiveRunner(engine)
        self.signal_clients: dict[str, WebSocket] = {}
        self.media_queues: set[asyncio.Queue] = set()
        self.chat_queues: set[asyncio.Queue] = set()
        engine.on_media_record = self._push_media
        engine.on_audio_to_cohost = self._push_media
        engine.on_chat_event = self._push_chat

    def _push_media(self, record: bytes) -> None:
        for q in list(self.media_queues):
            if q.qsize() > 90:  # zombie consumer: shed instead of buffering
                continue
            q.put_nowait(record)

    def _push_chat(self, event: dict) -> None:
        for q in list(self.chat_queues):
            if q.qsize() < 500:
                q.put_nowait(event)

    async def deliver_signal(self, outbound: list[tuple[str, dict]]) -> None:
        for dest, msg in outbound:
            if dest == SIM_HOST_ID:
                followup = self.engine.sim_host_receive(msg)
                await self.deliver_signal(followup)
                continue
            ws = self.signal_clients.get(dest)
            if ws is not None:
                try:
                    await ws.send_text(json.dumps(msg))
                except Exception:
                    self.signal_clients.pop(dest, None)


def create_app(config: Config | None = None, engine: Engine | None = None) -> FastAPI:
    config = config or Config()
    engine = engine or Engine(config)
    hub = Hub(engine)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        hub.runner.start()
        try:
            yield
        finally:
            await hub.runner.stop()
            _persist(engine)

    app = FastAPI(title="funnel", lifespan=lifespan)
    app.state.engine = engine
    app.state.hub = hub
    lock = hub.runner.lock

    # ------------------------------------------------------------ signaling

    @app.websocket("/signal")
    async def signal_ws(ws: WebSocket):
        await ws.accept()
        bound_id: str | None = None
        try:
            while True:
                try:
                    msg = json.loads(await ws.receive_text())
                except json.JSONDecodeError:
                    await ws.send_text(json.dumps({"type": "error", "reason": "malformed"}))
                    continue
                client_id = msg.get("client_id") or bound_id
                if client_id is None:
                    await ws.send_text(json.dumps({"type": "error", "reason": "client_id required"}))
                    continue
                if msg.get("type") == "join":
                    bound_id = client_id
                    self_before = hub.signal_clients.get(client_id)
                    hub.signal_clients[client_id] = ws
                    if self_before is not None and self_before is not ws:
                        log.info("signal client %s reconnected", client_id)
                async with lock:
                    outbound = engine.apply_join(client_id, msg)
                local = [m for m in outbound if m[0] == client_id]
                remote = [m for m in outbound if m[0] != client_id]
                for _, m in local:
                    await ws.send_text(json.dumps(m))
                await hub.deliver_signal(remote)
        except WebSocketDisconnect:
            pass
        finally:
            if bound_id is not None:
                hub.signal_clients.pop(bound_id, None)
                async with lock:
                    engine.apply_join(bound_id, {"type": "bye"})

    # ------------------------------------------------------------- commands

    @app.post("/api/command", response_model=CommandResponse)
    async def api_command(req: CommandRequest):
        async with lock:
            res = engine.apply_command(req.token, req.cmd, req.params)
        body = res.as_dict()
        return CommandResponse(ok=body["ok"], result=body.get("result"), error=body.get("error"))

    @app.websocket("/relay")
    async def relay_ws(ws: WebSocket):
        await ws.accept()
        try:
            while True:
                try:
                    msg = json.loads(await ws.receive_text())
                except json.JSONDecodeError:
                    await ws.send_text(json.dumps({"ok": False, "error": "malformed"}))
                    continue
                req_id = msg.get("id")
                async with lock:
                    res = engine.apply_command(msg.get("token", ""), msg.get("cmd", ""), msg.get("params") or {})
                body = res.as_dict()
                if req_id is not None:
                    body["id"] = req_id
                await ws.send_text(json.dumps(body))
        except WebSocketDisconnect:
            pass

    # ----------------------------------------------------------------- chat

    @app.post("/api/chat", response_model=ChatPostResponse)
    async def api_chat(req: ChatPostRequest):
        try:
            async with lock:
                msg_id = engine.apply_chat(req.client_id, req.text)
        except AuthError as e:
            return ChatPostResponse(ok=False, error=f"auth: {e}")
        except ValidationError as e:
            return ChatPostResponse(ok=False, error=f"validation {e}")
        return ChatPostResponse(ok=True, msg_id=msg_id)

    @app.get("/api/chat", response_model=ChatLedgerResponse)
    async def api_chat_ledger():
        async with lock:
            messages = [m.public() for m in engine.session.chat]
        return ChatLedgerResponse(messages=messages)

    @app.websocket("/chat")
    async def chat_ws(ws: WebSocket):
        await ws.accept()
        q: asyncio.Queue = asyncio.Queue()
        hub.chat_queues.add(q)
        try:
            async with lock:
                backlog = [m.public() for m in engine.session.chat]
            await ws.send_text(json.dumps({"event": "backlog", "messages": backlog}))
            while True:
                event = await q.get()
                await ws.send_text(json.dumps(event))
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            hub.chat_queues.discard(q)

    # ---------------------------------------------------------------- audio

    @app.post("/api/audio", response_model=AudioPostResponse)
    async def api_audio(req: AudioPostRequest):
        async with lock:
            client_id = engine.session.tokens.get(req.token)
            if client_id is None:
                return AudioPostResponse(ok=False, error="auth: invalid session token")
            role = engine.session.role_of(client_id)
            if role not in (Role.CO_HOST, Role.VR_HOST):
                return AudioPostResponse(ok=False, error="auth: audio requires a host token")
            try:
                payload = base64.b64decode(req.payload_b64 or "", validate=True)
            except (binascii.Error, ValueError):
                return AudioPostResponse(ok=False, error="validation payload_b64: not base64")
            dests = engine.route_audio_packet(AudioPacket(role, payload, engine.pts_ms))
        return AudioPostResponse(ok=True, delivered_to=dests)

    # --------------------------------------------------------------- tablet

    @app.get("/api/tablet", response_model=TabletResponse)
    async def api_tablet(token: str = Query("")):
        async with lock:
            client_id = engine.session.tokens.get(token)
            if client_id is None or engine.session.role_of(client_id) is not Role.VR_HOST:
                return JSONResponse({"detail": "vr-host token required"}, status_code=403)
            view = engine.session.tablet_view()
            return TabletResponse(
                on_air=view.on_air,
                history=[
                    {
                        "kind": i.kind,
                        "t": i.t_ms,
                        "text": i.text,
                        "source": i.source,
                        "msg_id": i.msg_id,
                        "image_sha": i.image_sha,
                    }
                    for i in view.history
                ],
                snapshot_pts=view.snapshot.pts if view.snapshot else None,
                snapshot_label=view.snapshot.camera_label if view.snapshot else None,
            )

    @app.get("/api/state", response_model=StateSummary)
    async def api_state():
        async with lock:
            return StateSummary(**engine.state_summary())

    # ---------------------------------------------------------------- media

    @app.websocket("/media")
    async def media_ws(ws: WebSocket):
        token = ws.query_params.get("token", "")
        async with lock:
            client_id = engine.session.tokens.get(token)
            ok = client_id is not None and engine.session.role_of(client_id) is Role.CO_HOST
        if not ok:
            await ws.close(code=4403)
            return
        await ws.accept()
        q: asyncio.Queue = asyncio.Queue()
        hub.media_queues.add(q)
        try:
            while True:
                record = await q.get()
                await ws.send_bytes(record)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            hub.media_queues.discard(q)

    # -------------------------------------------------------------- fan-out

    @app.get("/live/stats", response_model=LiveStats)
    async def live_stats():
        async with lock:
            return LiveStats(
                epoch_ms=engine.epoch_wall_ms,
                newest_seq=engine.store.newest_seq,
                media_sequence=engine.store.media_sequence,
                segment_ms=engine.config.segment_ms,
                default_offset=engine.config.live_edge_offset,
                rungs=[r.name for r in engine.store.rungs],
            )

    @app.get("/live/{rung}/playlist.json")
    async def live_playlist(rung: str):
        async with lock:
            try:
                text = engine.store.playlist_text(rung)
            except KeyError:
                return JSONResponse({"detail": f"unknown rung {rung!r}"}, status_code=404)
        return PlainTextResponse(text, media_type="application/json")

    @app.get("/live/{rung}/seg/{seq}")
    async def live_segment(rung: str, seq: int):
        async with lock:
            try:
                body = engine.store.segment_bytes(rung, seq)
            except SegmentNotYet:
                return JSONResponse({"detail": f"segment {seq} not yet available"}, status_code=404)
            except SegmentGone:
                return JSONResponse({"detail": f"segment {seq} gone"}, status_code=410)
            except KeyError:
                return JSONResponse({"detail": f"unknown rung {rung!r}"}, status_code=404)
        return Response(content=body, media_type="application/octet-stream")

    # ----------------------------------------------------------------- pages

    @app.get("/")
    async def cohost_page():
        return _page("cohost.html", "co-host console")

    @app.get("/spectator")
    async def spectator_page():
        return _page("spectator.html", "spectator player")

    @app.get("/app/{asset}")
    async def frontend_asset(asset: str):
        target = (FRONTEND_DIR / asset).resolve()
        if target.is_file() and target.parent == FRONTEND_DIR.resolve():
            media = "text/javascript" if asset.endswith(".js") else None
            return FileResponse(target, media_type=media)
        return JSONResponse({"detail": "not found"}, status_code=404)

    return app


def _page(name: str, label: str):
    path = FRONTEND_DIR / name
    if path.is_file():
        return FileResponse(path, media_type="text/html")
    return PlainTextResponse(
        f"funnel {label}: frontend not built (run `npm run build` in frontend/)",
        media_type="text/plain",
    )


def _persist(engine: Engine) -> None:
    cfg = engine.config
    if cfg.chat_persist_path:
        Path(cfg.chat_persist_path).write_text(engine.dump_chat_ledger())
    if cfg.command_log_path:
        Path(cfg.command_log_path).write_text(engine.dump_event_log())
