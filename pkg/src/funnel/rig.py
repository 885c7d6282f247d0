"""Co-host camera rigs: free camera plus four presets that track the avatar.

Follow targets are closed-form functions of the avatar head; with a nonzero
smoothing time constant the pose approaches the target exponentially, which
keeps follow views stable even when the tracked head is shaky.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

from .geom import UP, InputDomainError, Pose, UnitQuat, Vec3, look_rotation
from .scenario import AvatarState

SHOULDER_RIGHT = 0.35
SHOULDER_UP = 0.25
FOLLOW_ELEVATION = 0.3  # fraction of arm length
PITCH_LIMIT = math.pi / 2 - 1e-3
GRAB_REACH = 0.5  # meters

DEFAULT_ARM_MIN = 0.5
DEFAULT_ARM_MAX = 20.0
DEFAULT_SMOOTHING_TAU = 0.25


class RigMode(str, Enum):
    FREE = "free"
    FIRST_PERSON = "first_person"
    OVER_SHOULDER = "over_shoulder"
    THIRD_FOLLOW = "third_follow"
    MAP_VIEW = "map_view"


class RigStateError(RuntimeError):
    """Operation called on a rig in the wrong state."""


@dataclass(frozen=True, slots=True)
class FreeCamInput:
    forward: float = 0.0
    right: float = 0.0
    up: float = 0.0
    yaw_delta: float = 0.0
    pitch_delta: float = 0.0
    dt: float = 1.0 / 30.0

    def __post_init__(self) -> None:
        for name in ("forward", "right", "up"):
            v = getattr(self, name)
            if not -1.0 <= v <= 1.0 or v != v:
                raise InputDomainError(f"{name} axis {v} outside [-1, 1]")
        if not self.dt > 0:
            raise InputDomainError("dt must be > 0")


@dataclass(frozen=True, slots=True)
class CameraRig:
    mode: RigMode
    pose: Pose
    arm_length: float = 3.0
    arm_min: float = DEFAULT_ARM_MIN
    arm_max: float = DEFAULT_ARM_MAX
    smoothing_tau: float = DEFAULT_SMOOTHING_TAU
    grabbed_by_vr: bool = False
    grab_offset: Pose | None = None

    def __post_init__(self) -> None:
        if self.grabbed_by_vr and self.mode is not RigMode.FREE:
            raise RigStateError("only the free camera can be grabbed")


def _horizontal_forward(q: UnitQuat, fallback: Vec3) -> Vec3:
    f = q.forward()
    h = Vec3(f.x, 0.0, f.z)
    if h.norm() < 1e-9:
        h = Vec3(fallback.x, 0.0, fallback.z)
        if h.norm() < 1e-9:
            h = Vec3(0.0, 0.0, -1.0)
    return h.normalized()


def follow_target(rig: CameraRig, avatar: AvatarState) -> Pose:
    """Closed-form target pose for the rig's mode given the avatar."""
    head = avatar.head
    if rig.mode is RigMode.FIRST_PERSON:
        return head
    if rig.mode is RigMode.OVER_SHOULDER:
        # Head frame: +X right, +Y up, +Z behind.
        pos = head.apply(Vec3(SHOULDER_RIGHT, SHOULDER_UP, rig.arm_length))
        return Pose(pos, head.orientation)
    if rig.mode is RigMode.THIRD_FOLLOW:
        fwd = _horizontal_forward(head.orientation, rig.pose.orientation.forward())
        pos = head.position - fwd * rig.arm_length + Vec3(0.0, FOLLOW_ELEVATION * rig.arm_length, 0.0)
        look = head.position - pos
        return Pose(pos, look_rotation(look))
    if rig.mode is RigMode.MAP_VIEW:
        fwd = _horizontal_forward(head.orientation, rig.pose.orientation.up())
        pos = head.position + Vec3(0.0, rig.arm_length, 0.0)
        return Pose(pos, look_rotation(Vec3(0.0, -1.0, 0.0), up=fwd))
    raise RigStateError(f"mode {rig.mode} has no follow target")


def update_rig(rig: CameraRig, avatar: AvatarState, dt: float) -> CameraRig:
    """Advance one tick: first-person copies the head, the other follow
    modes approach their targets; free or grabbed rigs are untouched."""
    if dt <= 0:
        raise InputDomainError("dt must be > 0")
    if rig.mode is RigMode.FREE or rig.grabbed_by_vr:
        return rig
    if rig.mode is RigMode.FIRST_PERSON:
        return replace(rig, pose=avatar.head)
    target = follow_target(rig, avatar)
    if rig.smoothing_tau <= 0.0:
        return replace(rig, pose=target)
    alpha = 1.0 - math.exp(-dt / rig.smoothing_tau)
    return replace(rig, pose=rig.pose.interpolate(target, alpha))


def set_arm_length(rig: CameraRig, value: float) -> CameraRig:
    if value != value:  # NaN
        raise InputDomainError("arm length is NaN")
    return replace(rig, arm_length=min(max(value, rig.arm_min), rig.arm_max))


def _yaw_pitch(q: UnitQuat) -> tuple[float, float]:
    f = q.forward()
    pitch = math.asin(max(-1.0, min(1.0, f.y)))
    h = Vec3(f.x, 0.0, f.z)
    if h.norm() < 1e-9:
        return 0.0, pitch
    # yaw measured from -Z toward -X (right-handed about +Y)
    return math.atan2(-f.x, -f.z), pitch


def _from_yaw_pitch(yaw: float, pitch: float) -> UnitQuat:
    return UnitQuat.from_axis_angle(UP, yaw) * UnitQuat.from_axis_angle(Vec3(1, 0, 0), pitch)


def apply_free_input(rig: CameraRig, inp: FreeCamInput, speed: float) -> CameraRig:
    """WASD-and-mouse motion of the free camera."""
    if rig.mode is not RigMode.FREE:
        raise RigStateError("free-camera input only applies to the free rig")
    if rig.grabbed_by_vr:
        raise RigStateError("camera is grabbed by the headset user")
    q = rig.pose.orientation
    move = (
        q.forward() * (inp.forward * speed * inp.dt)
        + q.right() * (inp.right * speed * inp.dt)
        + q.up() * (inp.up * speed * inp.dt)
    )
    yaw, pitch = _yaw_pitch(q)
    yaw += inp.yaw_delta
    pitch = min(max(pitch + inp.pitch_delta, -PITCH_LIMIT), PITCH_LIMIT)
    return replace(rig, pose=Pose(rig.pose.position + move, _from_yaw_pitch(yaw, pitch)))


def grab_main_camera(rig: CameraRig, hand: Pose) -> CameraRig:
    """Attach the free camera rigidly to the hand; None-equivalent rejection
    (unchanged rig) when out of reach."""
    if rig.mode is not RigMode.FREE:
        raise RigStateError("only the free camera can be grabbed")
    if rig.grabbed_by_vr:
        raise RigStateError("camera already grabbed")
    if (hand.position - rig.pose.position).norm() > GRAB_REACH:
        return rig
    offset = hand.inverse().compose(rig.pose)
    return replace(rig, grabbed_by_vr=True, grab_offset=offset)


def move_grabbed(rig: CameraRig, hand: Pose) -> CameraRig:
    if not rig.grabbed_by_vr or rig.grab_offset is None:
        raise RigStateError("camera is not grabbed")
    return replace(rig, pose=hand.compose(rig.grab_offset))


def release(rig: CameraRig) -> CameraRig:
    if not rig.grabbed_by_vr:
        raise RigStateError("camera is not grabbed")
    return replace(rig, grabbed_by_vr=False, grab_offset=None)


def default_rigs(
    free_pose: Pose,
    arm_length: float = 3.0,
    arm_min: float = DEFAULT_ARM_MIN,
    arm_max: float = DEFAULT_ARM_MAX,
    smoothing_tau: float = DEFAULT_SMOOTHING_TAU,
) -> dict[RigMode, CameraRig]:
    """One rig per mode, follow rigs starting at the free pose."""
    rigs = {}
    for mode in RigMode:
        rigs[mode] = CameraRig(
            mode=mode,
            pose=free_pose,
            arm_length=arm_length,
            arm_min=arm_min,
            arm_max=arm_max,
            smoothing_tau=smoothing_tau,
        )
    return rigs
