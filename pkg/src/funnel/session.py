"""Session state machine: roles, signaling relay, the co-host command API,
chat filtering, audio routing, and the headset user's tablet.

One VR host, at most one co-host, unbounded spectators. Spectators never
join through signaling (they use the buffered fan-out) and never reach the
headset user directly: every chat message sits in the public ledger until
the co-host relays it.

All methods are synchronous state transitions on one Session object; the
service layer serializes calls through its event loop, so replaying the
same call sequence reproduces the same state bit for bit.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from .bvh import SceneIndex
from .geom import CameraIntrinsics, InputDomainError, Vec3, unproject
from .render.overlays import (
    Annotation,
    Audience,
    OverlaySet,
    Target,
    WindowedAnnotation,
    composite_windowed,
)
from .render.raster import Frame
from .rig import (
    CameraRig,
    FreeCamInput,
    RigMode,
    RigStateError,
    apply_free_input,
    set_arm_length,
)
from .scene import Scene

ANNOTATION_MISS_DEPTH = 5.0  # meters along the ray when nothing is hit
CHAT_MAX_CHARS = 500
FREE_CAM_SPEED = 3.0  # m/s


class Role(str, Enum):
    VR_HOST = "vr_host"
    CO_HOST = "co_host"
    SPECTATOR = "spectator"


class ConnState(str, Enum):
    JOINED = "joined"
    NEGOTIATING = "negotiating"
    CONNECTED = "connected"
    CLOSED = "closed"


_STATE_ORDER = [ConnState.JOINED, ConnState.NEGOTIATING, ConnState.CONNECTED, ConnState.CLOSED]


def _forward(cur: ConnState, new: ConnState) -> ConnState:
    return new if _STATE_ORDER.index(new) > _STATE_ORDER.index(cur) else cur


class AuthError(PermissionError):
    pass


class ValidationError(ValueError):
    def __init__(self, fieldname: str, message: str):
        super().__init__(f"{fieldname}: {message}")
        self.fieldname = fieldname


@dataclass(slots=True)
class ChatMessage:
    msg_id: int
    sender: str
    sender_role: Role
    text: str
    t_ms: int
    relayed: bool = False

    def public(self) -> dict:
        return {
            "msg_id": self.msg_id,
            "sender": self.sender,
            "sender_role": self.sender_role.value,
            "text": self.text,
            "t": self.t_ms,
            "relayed": self.relayed,
        }


@dataclass(frozen=True, slots=True)
class TabletItem:
    kind: str  # "text" | "windowed"
    t_ms: int
    text: str = ""
    source: str = ""  # "relay" (spectator message) | "co_host"
    msg_id: int | None = None
    image_sha: str = ""


@dataclass(frozen=True, slots=True)
class TabletState:
    snapshot: Frame | None
    on_air: bool
    history: tuple[TabletItem, ...]


@dataclass(frozen=True, slots=True)
class AudioPacket:
    source_role: Role
    payload: bytes
    t_ms: int


def route_audio(source_role: Role, on_air: bool) -> list[Role]:
    """Destination table: headset audio always reaches the co-host and goes
    public only while on-air; co-host audio is always private."""
    if source_role is Role.VR_HOST:
        return [Role.CO_HOST, Role.SPECTATOR] if on_air else [Role.CO_HOST]
    if source_role is Role.CO_HOST:
        return [Role.VR_HOST]
    return []


@dataclass(slots=True)
class CommandResult:
    ok: bool
    rejected: bool = False
    error: str | None = None
    data: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out: dict = {"ok": self.ok}
        if self.error is not None:
            out["error"] = self.error
        else:
            result = dict(self.data)
            if self.rejected:
                result["rejected"] = True
            out["result"] = result
        return out


@dataclass(slots=True)
class ClientInfo:
    role: Role
    state: ConnState


class Session:
    """Owns all mediation state; driven by the engine's event loop."""

    def __init__(
        self,
        scene: Scene,
        index: SceneIndex,
        rigs: dict[RigMode, CameraRig],
        intr: CameraIntrinsics,
        token_seed: str = "dev-seed",
        frame_source: Callable[[], Frame] | None = None,
        clock_ms: Callable[[], int] | None = None,
    ):
        self.scene = scene
        self.index = index
        self.rigs = rigs
        self.intr = intr
        self.token_seed = token_seed
        self.frame_source = frame_source
        self.clock_ms = clock_ms or (lambda: 0)

        self.clients: dict[str, ClientInfo] = {}
        self.tokens: dict[str, str] = {}  # token -> client_id
        self.holders: dict[Role, str | None] = {Role.VR_HOST: None, Role.CO_HOST: None}
        self.active_rig: RigMode = RigMode.FREE
        self.overlays = OverlaySet()
        self.chat: list[ChatMessage] = []
        self.tablet_history: list[TabletItem] = []
        self.tablet_snapshot: Frame | None = None
        self.on_air = False
        self._token_counter = 0
        self._annotation_counter = 0
        self._target_counter = 0

    # ------------------------------------------------------------ signaling

    def handle_signal(self, client_id: str, msg: dict) -> list[tuple[str, dict]]:
        """Total function: any input yields outbound messages, never raises."""
        if not isinstance(msg, dict):
            return [(client_id, {"type": "error", "reason": "malformed"})]
        mtype = msg.get("type")
        if mtype == "join":
            return self._signal_join(client_id, msg)
        if mtype in ("offer", "answer", "candidate"):
            return self._signal_relay(client_id, msg, mtype)
        if mtype == "bye":
            return self._signal_bye(client_id)
        return [(client_id, {"type": "error", "reason": f"unknown_type:{mtype}"})]

    def _signal_join(self, client_id: str, msg: dict) -> list[tuple[str, dict]]:
        role_name = msg.get("role")
        try:
            role = Role(role_name)
        except ValueError:
            return [(client_id, {"type": "rejected", "reason": f"unknown_role:{role_name}"})]
        if role is Role.SPECTATOR:
            return [(client_id, {"type": "rejected", "reason": "use_spectator_endpoint"})]
        existing = self.clients.get(client_id)
        if existing is not None and existing.state is not ConnState.CLOSED:
            return [(client_id, {"type": "rejected", "reason": "already_joined"})]
        holder = self.holders[role]
        if holder is not None:
            return [(client_id, {"type": "rejected", "reason": "role_taken"})]
        self.holders[role] = client_id
        self.clients[client_id] = ClientInfo(role=role, state=ConnState.JOINED)
        token = self._mint_token(role)
        self.tokens[token] = client_id
        return [(client_id, {"type": "role_assigned", "role": role.value, "session_token": token})]

    def _signal_relay(self, client_id: str, msg: dict, mtype: str) -> list[tuple[str, dict]]:
        info = self.clients.get(client_id)
        if info is None or info.state is ConnState.CLOSED:
            return [(client_id, {"type": "error", "reason": "not_joined"})]
        other_role = Role.CO_HOST if info.role is Role.VR_HOST else Role.VR_HOST
        counterpart = self.holders[other_role]
        if counterpart is None:
            return [(client_id, {"type": "error", "reason": "no_counterpart"})]
        peer = self.clients[counterpart]
        if mtype == "offer":
            info.state = _forward(info.state, ConnState.NEGOTIATING)
            peer.state = _forward(peer.state, ConnState.NEGOTIATING)
        elif mtype == "answer":
            info.state = _forward(info.state, ConnState.CONNECTED)
            peer.state = _forward(peer.state, ConnState.CONNECTED)
        return [(counterpart, msg)]  # blob passed through untouched

    def _signal_bye(self, client_id: str) -> list[tuple[str, dict]]:
        info = self.clients.get(client_id)
        if info is None:
            return []
        info.state = ConnState.CLOSED
        if self.holders.get(info.role) == client_id:
            self.holders[info.role] = None
        self.tokens = {t: c for t, c in self.tokens.items() if c != client_id}
        del self.clients[client_id]
        return []

    def _mint_token(self, role: Role) -> str:
        self._token_counter += 1
        material = f"{self.token_seed}:{role.value}:{self._token_counter}"
        return hashlib.sha256(material.encode()).hexdigest()[:32]

    def connection_state(self, client_id: str) -> ConnState | None:
        info = self.clients.get(client_id)
        return info.state if info else None

    # ------------------------------------------------------------- commands

    def handle_command(self, token: str, cmd: str, params: dict | None = None) -> CommandResult:
        params = params or {}
        client_id = self.tokens.get(token)
        if client_id is None or self.clients.get(client_id) is None:
            return CommandResult(ok=False, error="auth: invalid session token")
        if self.clients[client_id].role is not Role.CO_HOST:
            return CommandResult(ok=False, error="auth: commands require the co-host token")
        handler = getattr(self, f"_cmd_{cmd}", None)
        if handler is None:
            return CommandResult(ok=False, error=f"cmd: unknown command {cmd!r}")
        try:
            return handler(params)
        except ValidationError as e:
            return CommandResult(ok=False, error=f"validation {e}")
        except (InputDomainError, RigStateError) as e:
            return CommandResult(ok=False, error=f"state: {e}")

    def _pixel(self, params: dict, xf: str = "x", yf: str = "y") -> tuple[float, float]:
        try:
            x = float(params[xf])
            y = float(params[yf])
        except (KeyError, TypeError, ValueError):
            raise ValidationError(xf, "pixel coordinates required")
        if not (0 <= x < self.intr.width_px):
            raise ValidationError(xf, f"outside viewport 0..{self.intr.width_px - 1}")
        if not (0 <= y < self.intr.height_px):
            raise ValidationError(yf, f"outside viewport 0..{self.intr.height_px - 1}")
        return x, y

    def _raycast_pixel(self, x: float, y: float):
        pose = self.rigs[self.active_rig].pose
        ray = unproject(x, y, pose, self.intr)
        return ray, self.index.raycast(ray)

    def _anchor_polyline(self, pixels: list) -> tuple[Vec3, ...]:
        if not isinstance(pixels, list) or len(pixels) < 2:
            raise ValidationError("polyline_px", "need at least 2 pixels")
        points = []
        for p in pixels:
            try:
                x, y = float(p[0]), float(p[1])
            except (TypeError, ValueError, IndexError):
                raise ValidationError("polyline_px", "pixels must be [x, y] pairs")
            if not (0 <= x < self.intr.width_px and 0 <= y < self.intr.height_px):
                raise ValidationError("polyline_px", "pixel outside viewport")
            ray, hit = self._raycast_pixel(x, y)
            points.append(hit.point if hit else ray.at(ANNOTATION_MISS_DEPTH))
        return tuple(points)

    def _cmd_annotate_vr(self, params: dict) -> CommandResult:
        return self._annotate(params, Audience.VR_ONLY)

    def _cmd_annotate_spec(self, params: dict) -> CommandResult:
        return self._annotate(params, Audience.SPECTATOR_ONLY)

    def _annotate(self, params: dict, audience: Audience) -> CommandResult:
        points = self._anchor_polyline(params.get("polyline_px"))
        self._annotation_counter += 1
        ann = Annotation(
            annotation_id=self._annotation_counter,
            audience=audience,
            points=points,
            stroke_px=int(params.get("stroke_px", 3)),
        )
        self.overlays.annotations.append(ann)
        return CommandResult(ok=True, data={"annotation_id": ann.annotation_id, "points": len(points)})

    def _cmd_annotate_windowed(self, params: dict) -> CommandResult:
        strokes = params.get("strokes_px")
        if not isinstance(strokes, list) or not strokes:
            raise ValidationError("strokes_px", "need at least one stroke")
        clean: list[list[tuple[float, float]]] = []
        for stroke in strokes:
            if not isinstance(stroke, list) or not stroke:
                raise ValidationError("strokes_px", "each stroke is a list of [x, y]")
            try:
                clean.append([(float(p[0]), float(p[1])) for p in stroke])
            except (TypeError, ValueError, IndexError):
                raise ValidationError("strokes_px", "pixels must be [x, y] pairs")
        if self.frame_source is None:
            return CommandResult(ok=False, error="state: no spectator frame available")
        snapshot = self.frame_source()
        composited = composite_windowed(snapshot, clean, int(params.get("stroke_px", 3)))
        wa = WindowedAnnotation(snapshot=snapshot, strokes_2d=clean, composited=composited)
        self.overlays.windowed.append(wa)
        sha = hashlib.sha256(composited.to_bytes()).hexdigest()
        self.tablet_history.append(
            TabletItem(kind="windowed", t_ms=self.clock_ms(), source="co_host", image_sha=sha)
        )
        return CommandResult(ok=True, data={"windowed_count": len(self.overlays.windowed), "image_sha": sha})

    def _cmd_place_target(self, params: dict) -> CommandResult:
        x, y = self._pixel(params)
        _, hit = self._raycast_pixel(x, y)
        if hit is None:
            return CommandResult(ok=True, rejected=True, data={"reason": "no_surface"})
        self._target_counter += 1
        t = Target(target_id=self._target_counter, position=hit.point, normal=hit.normal)
        self.overlays.targets.append(t)
        return CommandResult(ok=True, data={
            "target_id": t.target_id,
            "position": list(hit.point.as_tuple()),
            "object_id": hit.object_id,
        })

    def _cmd_select_object(self, params: dict) -> CommandResult:
        x, y = self._pixel(params)
        _, hit = self._raycast_pixel(x, y)
        if hit is None:
            return CommandResult(ok=True, rejected=True, data={"reason": "no_object"})
        try:
            obj = self.scene.object(hit.object_id)
        except KeyError:
            return CommandResult(ok=True, rejected=True, data={"reason": "no_object"})
        if not obj.selectable:
            return CommandResult(ok=True, rejected=True, data={"reason": "not_selectable", "object_id": obj.object_id})
        selected = self.overlays.selection.toggle(obj.object_id)
        return CommandResult(ok=True, data={"object_id": obj.object_id, "selected": selected})

    def _cmd_remove_windowed(self, params: dict) -> CommandResult:
        n = len(self.overlays.windowed)
        self.overlays.windowed.clear()
        return CommandResult(ok=True, data={"removed": n})

    def _cmd_remove_all_annotations(self, params: dict) -> CommandResult:
        n = len(self.overlays.annotations)
        self.overlays.annotations.clear()
        return CommandResult(ok=True, data={"removed": n})

    def _cmd_remove_targets(self, params: dict) -> CommandResult:
        n = len(self.overlays.targets)
        self.overlays.targets.clear()
        return CommandResult(ok=True, data={"removed": n})

    def _cmd_switch_camera(self, params: dict) -> CommandResult:
        try:
            mode = RigMode(params.get("mode"))
        except ValueError:
            raise ValidationError("mode", f"unknown rig mode {params.get('mode')!r}")
        self.active_rig = mode
        return CommandResult(ok=True, data={"active": mode.value})

    def _cmd_set_arm(self, params: dict) -> CommandResult:
        try:
            value = float(params["value"])
        except (KeyError, TypeError, ValueError):
            raise ValidationError("value", "numeric arm length required")
        rig = self.rigs[self.active_rig]
        self.rigs[self.active_rig] = set_arm_length(rig, value)
        return CommandResult(ok=True, data={"arm_length": self.rigs[self.active_rig].arm_length})

    def _cmd_free_cam_input(self, params: dict) -> CommandResult:
        try:
            inp = FreeCamInput(
                forward=float(params.get("forward", 0.0)),
                right=float(params.get("right", 0.0)),
                up=float(params.get("up", 0.0)),
                yaw_delta=float(params.get("yaw_delta", 0.0)),
                pitch_delta=float(params.get("pitch_delta", 0.0)),
                dt=float(params.get("dt", 1.0 / 30.0)),
            )
        except (TypeError, ValueError) as e:
            raise ValidationError("free_cam_input", str(e))
        rig = self.rigs[RigMode.FREE]
        self.rigs[RigMode.FREE] = apply_free_input(rig, inp, FREE_CAM_SPEED)
        return CommandResult(ok=True, data={})

    def _cmd_relay_chat(self, params: dict) -> CommandResult:
        try:
            msg_id = int(params["msg_id"])
        except (KeyError, TypeError, ValueError):
            raise ValidationError("msg_id", "integer message id required")
        msg = next((m for m in self.chat if m.msg_id == msg_id), None)
        if msg is None:
            raise ValidationError("msg_id", f"no message {msg_id}")
        if msg.relayed:
            return CommandResult(ok=False, error="state: message already relayed")
        msg.relayed = True
        self.tablet_history.append(
            TabletItem(kind="text", t_ms=self.clock_ms(), text=msg.text, source="relay", msg_id=msg_id)
        )
        return CommandResult(ok=True, data={"msg_id": msg_id})

    def _cmd_send_private_text(self, params: dict) -> CommandResult:
        text = params.get("text")
        if not isinstance(text, str) or not text:
            raise ValidationError("text", "non-empty text required")
        if len(text) > CHAT_MAX_CHARS:
            raise ValidationError("text", f"over {CHAT_MAX_CHARS} chars")
        self.tablet_history.append(
            TabletItem(kind="text", t_ms=self.clock_ms(), text=text, source="co_host")
        )
        return CommandResult(ok=True, data={"history_len": len(self.tablet_history)})

    def _cmd_set_on_air(self, params: dict) -> CommandResult:
        value = params.get("value")
        if not isinstance(value, bool):
            raise ValidationError("value", "boolean required")
        self.on_air = value
        return CommandResult(ok=True, data={"on_air": self.on_air})

    # ----------------------------------------------------------------- chat

    def role_of(self, client_id: str) -> Role:
        info = self.clients.get(client_id)
        return info.role if info else Role.SPECTATOR

    def ingest_chat(self, client_id: str, text: str) -> int:
        role = self.role_of(client_id)
        if role is Role.VR_HOST:
            raise AuthError("the headset user speaks on audio, not in chat")
        if not isinstance(text, str) or not text:
            raise ValidationError("text", "non-empty text required")
        if len(text) > CHAT_MAX_CHARS:
            raise ValidationError("text", f"over {CHAT_MAX_CHARS} chars")
        msg = ChatMessage(
            msg_id=len(self.chat) + 1,
            sender=client_id,
            sender_role=role,
            text=text,
            t_ms=self.clock_ms(),
        )
        self.chat.append(msg)
        return msg.msg_id

    # ---------------------------------------------------------------- audio

    def route_packet(self, pkt: AudioPacket) -> list[tuple[Role, AudioPacket]]:
        return [(dest, pkt) for dest in route_audio(pkt.source_role, self.on_air)]

    # --------------------------------------------------------------- tablet

    def refresh_tablet_snapshot(self, frame: Frame) -> None:
        self.tablet_snapshot = frame

    def tablet_view(self) -> TabletState:
        return TabletState(
            snapshot=self.tablet_snapshot,
            on_air=self.on_air,
            history=tuple(self.tablet_history),
        )

    # --------------------------------------------------------------- digest

    def state_digest(self) -> str:
        """Canonical hash of overlay/selection/tablet/rig state."""
        doc = {
            "active_rig": self.active_rig.value,
            "on_air": self.on_air,
            "annotations": [
                {
                    "id": a.annotation_id,
                    "audience": a.audience.value,
                    "stroke_px": a.stroke_px,
                    "points": [[p.x, p.y, p.z] for p in a.points],
                }
                for a in self.overlays.annotations
            ],
            "targets": [
                {
                    "id": t.target_id,
                    "position": [t.position.x, t.position.y, t.position.z],
                    "normal": [t.normal.x, t.normal.y, t.normal.z],
                    "radius": t.radius_m,
                }
                for t in self.overlays.targets
            ],
            "selection": sorted(self.overlays.selection.object_ids),
            "windowed": [hashlib.sha256(w.composited.to_bytes()).hexdigest() for w in self.overlays.windowed],
            "tablet": [
                {
                    "kind": i.kind,
                    "text": i.text,
                    "source": i.source,
                    "msg_id": i.msg_id,
                    "image_sha": i.image_sha,
                }
                for i in self.tablet_history
            ],
            "chat": [[m.msg_id, m.sender, m.text, m.relayed] for m in self.chat],
            "rigs": {
                mode.value: {
                    "pos": [r.pose.position.x, r.pose.position.y, r.pose.position.z],
                    "quat": [r.pose.orientation.w, r.pose.orientation.x, r.pose.orientation.y, r.pose.orientation.z],
                    "arm": r.arm_length,
                    "grabbed": r.grabbed_by_vr,
                }
                for mode, r in ((m, self.rigs[m]) for m in RigMode)
            },
        }
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()
