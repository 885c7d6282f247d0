"""Scripted playback standing in for a live headset user.

A scenario is JSON lines, one timestamped event per line:

    {"t": 0.0, "type": "set_avatar", "head": {...}, "left_hand": {...},
     "right_hand": {...}}
    {"t": 3.2, "type": "speak", "text": "...", "duration": 2.0}
    {"t": 5.0, "type": "grab_main_camera"}
    {"t": 6.0, "type": "move_grabbed_camera", "pose": {...}}
    {"t": 7.0, "type": "release_main_camera"}
    {"t": 9.1, "type": "touch_object", "object_id": "wand"}

Avatar state between set_avatar keyframes is interpolated: linear for
positions, spherical for orientations. Window queries emit events on the
half-open interval (from_t, to_t], so a partition of the timeline delivers
every event exactly once.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .geom import Pose
from .scene import SceneFormatError, pose_from_json, pose_to_json

EVENT_TYPES = {
    "set_avatar",
    "grab_main_camera",
    "move_grabbed_camera",
    "release_main_camera",
    "speak",
    "touch_object",
}


@dataclass(frozen=True, slots=True)
class AvatarState:
    head: Pose
    left_hand: Pose
    right_hand: Pose
    t: float


@dataclass(frozen=True, slots=True)
class ScenarioEvent:
    t: float
    type: str
    payload: dict


@dataclass(slots=True)
class ScenarioScript:
    events: list[ScenarioEvent]
    _keyframes: list[tuple[float, AvatarState]] = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        for prev, cur in zip(self.events, self.events[1:]):
            if cur.t < prev.t:
                raise SceneFormatError(
                    f"events out of order: t={cur.t} after t={prev.t}"
                )
        expecting_grab = True
        for ev in self.events:
            if ev.type == "grab_main_camera":
                if not expecting_grab:
                    raise SceneFormatError(f"grab at t={ev.t} while already grabbed")
                expecting_grab = False
            elif ev.type == "release_main_camera":
                if expecting_grab:
                    raise SceneFormatError(f"release at t={ev.t} without grab")
                expecting_grab = True
        self._keyframes = [
            (ev.t, _avatar_from_payload(ev.payload, ev.t))
            for ev in self.events
            if ev.type == "set_avatar"
        ]

    @property
    def end_t(self) -> float:
        return self.events[-1].t if self.events else 0.0

    def avatar_at(self, t: float) -> AvatarState:
        """Avatar state at time t from bracketing keyframes (exact at
        keyframe timestamps, clamped outside the keyframe range)."""
        kf = self._keyframes
        if not kf:
            return AvatarState(Pose.identity(), Pose.identity(), Pose.identity(), t)
        if t <= kf[0][0]:
            return _retime(kf[0][1], t)
        if t >= kf[-1][0]:
            return _retime(kf[-1][1], t)
        lo, hi = 0, len(kf) - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if kf[mid][0] <= t:
                lo = mid
            else:
                hi = mid
        t0, s0 = kf[lo]
        t1, s1 = kf[hi]
        if t == t0:
            return _retime(s0, t)
        if t == t1:
            return _retime(s1, t)
        a = (t - t0) / (t1 - t0)
        return AvatarState(
            head=s0.head.interpolate(s1.head, a),
            left_hand=s0.left_hand.interpolate(s1.left_hand, a),
            right_hand=s0.right_hand.interpolate(s1.right_hand, a),
            t=t,
        )

    def events_between(self, from_t: float, to_t: float) -> list[ScenarioEvent]:
        """Events with timestamp in (from_t, to_t], in script order."""
        return [ev for ev in self.events if from_t < ev.t <= to_t]


def _retime(s: AvatarState, t: float) -> AvatarState:
    return AvatarState(s.head, s.left_hand, s.right_hand, t)


def _avatar_from_payload(payload: dict, t: float) -> AvatarState:
    return AvatarState(
        head=pose_from_json(payload["head"], "set_avatar.head"),
        left_hand=pose_from_json(payload["left_hand"], "set_avatar.left_hand"),
        right_hand=pose_from_json(payload["right_hand"], "set_avatar.right_hand"),
        t=t,
    )


def advance(
    script: ScenarioScript, from_t: float, to_t: float
) -> tuple[AvatarState, list[ScenarioEvent]]:
    """State at to_t plus all events in (from_t, to_t].

    Past the script end the final state is held and nothing is emitted.
    """
    if from_t > to_t:
        raise ValueError(f"from_t {from_t} > to_t {to_t}")
    return script.avatar_at(to_t), script.events_between(from_t, to_t)


class Playback:
    """Single-owner cursor over a script; the first window includes t=0."""

    def __init__(self, script: ScenarioScript):
        self.script = script
        self._cursor: float | None = None

    @property
    def position(self) -> float:
        return self._cursor if self._cursor is not None else 0.0

    def step(self, to_t: float) -> tuple[AvatarState, list[ScenarioEvent]]:
        if self._cursor is None:
            state = self.script.avatar_at(to_t)
            events = [ev for ev in self.script.events if 0.0 <= ev.t <= to_t]
            self._cursor = to_t
            return state, events
        state, events = advance(self.script, self._cursor, to_t)
        self._cursor = to_t
        return state, events


def _event_from_line(doc: dict, line_no: int) -> ScenarioEvent:
    try:
        t = float(doc["t"])
        etype = doc["type"]
    except (KeyError, TypeError, ValueError) as e:
        raise SceneFormatError(f"line {line_no}: missing t/type: {e}") from e
    if etype not in EVENT_TYPES:
        raise SceneFormatError(f"line {line_no}: unknown event type {etype!r}")
    payload = {k: v for k, v in doc.items() if k not in ("t", "type")}
    if etype == "set_avatar":
        _avatar_from_payload(payload, t)  # validate poses up front
    return ScenarioEvent(t=t, type=etype, payload=payload)


def load_scenario(path: str | Path) -> ScenarioScript:
    path = Path(path)
    events = []
    for i, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as e:
            raise SceneFormatError(f"{path}:{i}: not valid JSON: {e}") from e
        events.append(_event_from_line(doc, i))
    return ScenarioScript(events)


def dump_scenario(script: ScenarioScript) -> Iterator[str]:
    for ev in script.events:
        yield json.dumps({"t": ev.t, "type": ev.type, **ev.payload})


def avatar_event(t: float, head: Pose, left: Pose, right: Pose) -> ScenarioEvent:
    return ScenarioEvent(
        t=t,
        type="set_avatar",
        payload={
            "head": pose_to_json(head),
            "left_hand": pose_to_json(left),
            "right_hand": pose_to_json(right),
        },
    )
