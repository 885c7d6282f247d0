"""The engine: deterministic tick core plus the live render/fan-out loop.

Determinism contract: scenario playback, rig updates and session commands
advance only inside `step()` and `apply_entry()`, both driven by the tick
counter, never by wall clock. The live server records every join, chat and
command with the tick it was applied after; replaying that log against a
fresh engine built from the same config reproduces the session state
exactly (see funnel.replay).

Rendering runs in a single worker thread and conflates: when a render is
still in flight at the next tick, the stale tick is skipped and the newest
state is rendered instead. Segment timing keys off frame pts, so skipped
frames never stretch spectator latency.
"""

from __future__ import annotations

import asyncio
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from typing import Callable

from ..bvh import build_index
from ..config import Config
from ..fanout import Segmenter, SegmentStore
from ..geom import CameraIntrinsics, Pose, Vec3, look_rotation
from ..render.overlays import Audience, OverlaySet, render, render_thumbnail
from ..render.raster import Frame
from ..rig import (
    RigMode,
    default_rigs,
    grab_main_camera,
    move_grabbed,
    release,
    update_rig,
)
from ..scenario import Playback, load_scenario
from ..scene import load_scene, pose_from_json
from ..session import AudioPacket, CommandResult, Role, Session

log = logging.getLogger("funnel.engine")

FREE_CAM_START_POS = Vec3(2.5, 1.6, 2.5)
FREE_CAM_START_LOOK = Vec3(-0.5, 1.2, -0.5)
SIM_HOST_ID = "sim-vr"


@dataclass(slots=True)
class LogEntry:
    kind: str  # "join" | "chat" | "command"
    after_tick: int
    data: dict
    outcome: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {"kind": self.kind, "after_tick": self.after_tick, **self.data, "outcome": self.outcome},
            sort_keys=True,
        )


class Engine:
    """Owns scene, scenario playback, rigs, session and the fan-out store."""

    def __init__(self, config: Config):
        self.config = config
        self.scene = load_scene(config.resolve_scene_path())
        self.index = build_index(self.scene)
        self.script = load_scenario(config.resolve_scenario_path())
        self.playback = Playback(self.script)
        free_pose = Pose(FREE_CAM_START_POS, look_rotation(FREE_CAM_START_LOOK - FREE_CAM_START_POS))
        rigs = default_rigs(
            free_pose,
            arm_min=config.arm_min,
            arm_max=config.arm_max,
            smoothing_tau=config.smoothing_tau,
        )
        self.intr = CameraIntrinsics(
            vertical_fov=config.render_fov_rad,
            width_px=config.render_width,
            height_px=config.render_height,
        )
        self.session = Session(
            self.scene,
            self.index,
            rigs,
            self.intr,
            token_seed=config.token_seed,
            frame_source=self.render_broadcast_now,
            clock_ms=lambda: self.pts_ms,
        )
        self.segmenter = Segmenter(
            rungs=config.ladder(),
            segment_ms=config.segment_ms,
            source_width=config.render_width,
            source_height=config.render_height,
        )
        self.store = SegmentStore(
            window=config.window, segment_ms=config.segment_ms, rungs=config.ladder()
        )
        self.tick = 0
        self.avatar = self.script.avatar_at(0.0)
        self.event_log: list[LogEntry] = []
        self.audio_counters: dict[str, int] = {r.value: 0 for r in Role}
        self.vr_audio_inbox: list[dict] = []
        self.touch_log: list[tuple[float, str]] = []
        self.grab_rejections = 0
        self.epoch_wall_ms: int | None = None
        self.metrics: Callable[[dict], None] | None = None
        self.on_media_record: Callable[[bytes], None] | None = None
        self.on_audio_to_cohost: Callable[[bytes], None] | None = None
        self.on_chat_event: Callable[[dict], None] | None = None
        self.vr_token: str | None = None
        self._register_sim_host()

    # ------------------------------------------------------------- identity

    def _register_sim_host(self) -> None:
        out = self.session.handle_signal(SIM_HOST_ID, {"type": "join", "role": "vr_host"})
        msg = out[0][1]
        if msg["type"] != "role_assigned":  # pragma: no cover - fresh session
            raise RuntimeError(f"sim host could not join: {msg}")
        self.vr_token = msg["session_token"]

    def sim_host_receive(self, msg: dict) -> list[tuple[str, dict]]:
        """The in-process headset side auto-answers relayed offers."""
        if msg.get("type") == "offer":
            blob = str(msg.get("blob", ""))
            answer = "sim-answer:" + hashlib.sha256(blob.encode()).hexdigest()[:16]
            return self.session.handle_signal(SIM_HOST_ID, {"type": "answer", "blob": answer})
        return []

    # ----------------------------------------------------------------- time

    @property
    def scenario_t(self) -> float:
        return self.tick / self.config.tick_hz

    @property
    def pts_ms(self) -> int:
        return round(self.tick * 1000 / self.config.tick_hz)

    # ----------------------------------------------------------------- core

    def step(self) -> None:
        """Advance one tick: scenario events, avatar, follow rigs."""
        self.tick += 1
        t = self.scenario_t
        if self.config.loop_scenario and self.script.end_t > 0:
            t = t % self.script.end_t
            if t < self.playback.position:  # wrapped: restart the cursor
                self.playback = Playback(self.script)
        self.avatar, events = self.playback.step(t)
        for ev in events:
            self._apply_scenario_event(ev)
        dt = 1.0 / self.config.tick_hz
        rigs = self.session.rigs
        for mode in (RigMode.FIRST_PERSON, RigMode.OVER_SHOULDER, RigMode.THIRD_FOLLOW, RigMode.MAP_VIEW):
            rigs[mode] = update_rig(rigs[mode], self.avatar, dt)

    def _apply_scenario_event(self, ev) -> None:
        rigs = self.session.rigs
        if ev.type == "grab_main_camera":
            before = rigs[RigMode.FREE]
            if before.grabbed_by_vr:
                self.grab_rejections += 1
                return
            rigs[RigMode.FREE] = grab_main_camera(before, self.avatar.right_hand)
            if not rigs[RigMode.FREE].grabbed_by_vr:
                self.grab_rejections += 1
        elif ev.type == "move_grabbed_camera":
            if rigs[RigMode.FREE].grabbed_by_vr:
                hand = pose_from_json(ev.payload["pose"], "move_grabbed_camera")
                rigs[RigMode.FREE] = move_grabbed(rigs[RigMode.FREE], hand)
        elif ev.type == "release_main_camera":
            if rigs[RigMode.FREE].grabbed_by_vr:
                rigs[RigMode.FREE] = release(rigs[RigMode.FREE])
        elif ev.type == "speak":
            payload = json.dumps({"text": ev.payload.get("text", ""), "t": ev.t}).encode()
            self.route_audio_packet(AudioPacket(Role.VR_HOST, payload, self.pts_ms))
        elif ev.type == "touch_object":
            self.touch_log.append((ev.t, ev.payload.get("object_id", "")))

    # ------------------------------------------------------------ rendering

    def _overlay_snapshot(self) -> OverlaySet:
        ov = self.session.overlays
        return OverlaySet(
            annotations=list(ov.annotations),
            targets=list(ov.targets),
            selection=type(ov.selection)(set(ov.selection.object_ids)),
            windowed=list(ov.windowed),
        )

    def render_broadcast_now(self) -> Frame:
        """Spectator-audience frame of the in-focus rig at the current tick."""
        mode = self.session.active_rig
        return render(
            self.scene,
            self.avatar,
            self.session.rigs[mode].pose,
            self.intr,
            self._overlay_snapshot(),
            Audience.SPECTATOR_ONLY,
            camera_label=mode.value,
            pts=self.pts_ms,
        )

    def render_vr_view_now(self) -> Frame:
        """Headset-audience frame from the avatar's eyes."""
        return render(
            self.scene,
            None,
            self.avatar.head,
            self.intr,
            self._overlay_snapshot(),
            Audience.VR_ONLY,
            camera_label="first_person",
            pts=self.pts_ms,
        )

    def render_thumbnail_now(self, mode: RigMode) -> Frame:
        return render_thumbnail(
            self.scene,
            self.avatar,
            self.session.rigs[mode].pose,
            self._overlay_snapshot(),
            camera_label=mode.value,
            pts=self.pts_ms,
        )

    # ---------------------------------------------------- logged transitions

    def apply_join(self, client_id: str, msg: dict) -> list[tuple[str, dict]]:
        out = self.session.handle_signal(client_id, msg)
        if msg.get("type") == "join":
            outcome = out[0][1] if out else {}
            self.event_log.append(
                LogEntry("join", self.tick, {"client_id": client_id, "role": msg.get("role")},
                         {"type": outcome.get("type")})
            )
        return out

    def apply_chat(self, client_id: str, text: str) -> int:
        msg_id = self.session.ingest_chat(client_id, text)
        self.event_log.append(
            LogEntry("chat", self.tick, {"client_id": client_id, "text": text}, {"msg_id": msg_id})
        )
        if self.on_chat_event:
            self.on_chat_event({"event": "message", **self.session.chat[msg_id - 1].public()})
        return msg_id

    def apply_command(self, token: str, cmd: str, params: dict | None = None) -> CommandResult:
        res = self.session.handle_command(token, cmd, params)
        self.event_log.append(
            LogEntry(
                "command", self.tick,
                {"token": token, "cmd": cmd, "params": params or {}},
                {"ok": res.ok, "error": res.error},
            )
        )
        if res.ok and cmd == "relay_chat" and self.on_chat_event:
            self.on_chat_event({"event": "relayed", "msg_id": (params or {}).get("msg_id")})
        if self.metrics:
            self.metrics({"event": "command", "tick": self.tick, "cmd": cmd, "ok": res.ok})
        return res

    def route_audio_packet(self, pkt: AudioPacket) -> list[str]:
        """Deliver per routing table; returns destination role names."""
        from ..wire import encode_audio

        dests = []
        for role, packet in self.session.route_packet(pkt):
            self.audio_counters[role.value] += 1
            dests.append(role.value)
            if role is Role.CO_HOST and self.on_audio_to_cohost:
                self.on_audio_to_cohost(encode_audio(packet.payload, packet.t_ms))
            if role is Role.VR_HOST:
                self.vr_audio_inbox.append({"t": packet.t_ms, "bytes": len(packet.payload)})
        return dests

    # ------------------------------------------------------------- fan-out

    def ingest_broadcast(self, frame: Frame, record: bytes | None = None) -> None:
        from ..wire import CAMERA_IDS

        camera_id = CAMERA_IDS[self.session.active_rig]
        seg = self.segmenter.ingest(frame, camera_id=camera_id, encoded_full=record)
        if seg is not None:
            self.store.append(seg)
            if self.metrics:
                self.metrics({"event": "segment_cut", "seq": seg.seq, "duration_ms": seg.duration_ms,
                              "frames": seg.frame_count})

    def state_summary(self) -> dict:
        return {
            "tick": self.tick,
            "scenario_t": self.scenario_t,
            "active_rig": self.session.active_rig.value,
            "on_air": self.session.on_air,
            "chat_len": len(self.session.chat),
            "annotations": len(self.session.overlays.annotations),
            "targets": len(self.session.overlays.targets),
            "selection": sorted(self.session.overlays.selection.object_ids),
            "newest_seq": self.store.newest_seq,
            "pts_regressions": self.segmenter.pts_regressions,
            "audio_counters": dict(self.audio_counters),
            "grab_rejections": self.grab_rejections,
            "epoch_ms": self.epoch_wall_ms,
        }

    # -------------------------------------------------------------- persist

    def dump_event_log(self) -> str:
        from ..replay import meta_line

        lines = [meta_line(self.config)] + [e.to_json() for e in self.event_log]
        # end marker: replay advances to the final tick even after the last entry
        lines.append(json.dumps({"kind": "end", "after_tick": self.tick}))
        return "\n".join(lines) + "\n"

    def dump_chat_ledger(self) -> str:
        return "\n".join(json.dumps(m.public()) for m in self.session.chat) + (
            "\n" if self.session.chat else ""
        )


class LiveRunner:
    """Paces the engine against the wall clock and drives the render worker."""

    def __init__(self, engine: Engine):
        self.engine = engine
        self.lock = asyncio.Lock()
        self._render_busy = False
        self._render_wanted = False
        self._stop = asyncio.Event()
        self._tasks: list[asyncio.Task] = []
        self._tablet_every = max(1, round(engine.config.tick_hz / engine.config.tablet_hz))
        thumb_period = engine.config.tick_hz / engine.config.thumbnail_fps
        self._thumb_slots = {
            int(round(k * thumb_period / 4)): mode
            for k, mode in enumerate(
                (RigMode.FIRST_PERSON, RigMode.OVER_SHOULDER, RigMode.THIRD_FOLLOW, RigMode.MAP_VIEW)
            )
        }
        self._thumb_period = max(1, int(round(thumb_period)))

    def start(self) -> None:
        self.engine.epoch_wall_ms = int(time.time() * 1000)
        self._tasks.append(asyncio.create_task(self._tick_loop(), name="tick-loop"))

    async def stop(self) -> None:
        self._stop.set()
        for t in self._tasks:
            t.cancel()
        for t in self._tasks:
            try:
                await t
            except (asyncio.CancelledError, Exception):
                pass

    async def _tick_loop(self) -> None:
        loop = asyncio.get_running_loop()
        engine = self.engine
        dt = 1.0 / engine.config.tick_hz
        next_t = loop.time()
        while not self._stop.is_set():
            next_t += dt
            async with self.lock:
                engine.step()
            await self._maybe_render()
            delay = next_t - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            elif delay < -1.0:
                # severely behind (debugger, suspended VM): resynchronize
                next_t = loop.time()

    async def _maybe_render(self) -> None:
        if self._render_busy:
            self._render_wanted = True  # conflate: newest state wins
            return
        self._render_busy = True
        asyncio.create_task(self._render_once())

    async def _render_once(self) -> None:
        loop = asyncio.get_running_loop()
        engine = self.engine
        try:
            while True:
                self._render_wanted = False
                async with self.lock:
                    tick = engine.tick
                    mode = engine.session.active_rig
                    pose = engine.session.rigs[mode].pose
                    overlays = engine._overlay_snapshot()
                    avatar = engine.avatar
                    pts = engine.pts_ms
                    thumb_mode = self._thumb_slots.get(tick % self._thumb_period)
                    thumb_pose = engine.session.rigs[thumb_mode].pose if thumb_mode else None

                t0 = time.perf_counter()
                frame, record, thumb_record = await loop.run_in_executor(
                    None, _render_job, engine, mode, pose, overlays, avatar, pts, thumb_mode, thumb_pose
                )
                render_ms = (time.perf_counter() - t0) * 1000.0

                async with self.lock:
                    engine.ingest_broadcast(frame, record)
                    if tick % self._tablet_every == 0:
                        engine.session.refresh_tablet_snapshot(frame)
                if engine.on_media_record:
                    engine.on_media_record(record)
                    if thumb_record:
                        engine.on_media_record(thumb_record)
                if engine.metrics:
                    engine.metrics({"event": "tick_render", "tick": tick, "render_ms": round(render_ms, 2)})
                if not self._render_wanted:
                    break
        finally:
            self._render_busy = False


def _render_job(engine, mode, pose, overlays, avatar, pts, thumb_mode, thumb_pose):
    """Runs in the worker thread; touches only the snapshot arguments."""
    from ..wire import CAMERA_IDS, encode_frame

    frame = render(
        engine.scene, avatar, pose, engine.intr, overlays,
        Audience.SPECTATOR_ONLY, camera_label=mode.value, pts=pts,
    )
    record = encode_frame(frame, CAMERA_IDS[mode], compress=True)
    thumb_record = None
    if thumb_mode is not None:
        thumb = render_thumbnail(
            engine.scene, avatar, thumb_pose, overlays, camera_label=thumb_mode.value, pts=pts
        )
        thumb_record = encode_frame(thumb, CAMERA_IDS[thumb_mode], compress=True, thumbnail=True)
    return frame, record, thumb_record
