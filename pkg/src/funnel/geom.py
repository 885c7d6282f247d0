"""Core 3D math: vectors, quaternions, poses, pinhole projection.

Conventions used throughout the package:

* right-handed coordinates, +Y up
* a camera looks along its local -Z axis
* screen coordinates are in pixels, origin top-left, x right, y down
"""

from __future__ import annotations

import math
from dataclasses import dataclass

UNIT_TOL = 1e-9


class InputDomainError(ValueError):
    """An argument is outside the operation's stated domain."""


@dataclass(frozen=True, slots=True)
class Vec3:
    x: float
    y: float
    z: float

    def __add__(self, o: "Vec3") -> "Vec3":
        return Vec3(self.x + o.x, self.y + o.y, self.z + o.z)

    def __sub__(self, o: "Vec3") -> "Vec3":
        return Vec3(self.x - o.x, self.y - o.y, self.z - o.z)

    def __mul__(self, s: float) -> "Vec3":
        return Vec3(self.x * s, self.y * s, self.z * s)

    __rmul__ = __mul__

    def __neg__(self) -> "Vec3":
        return Vec3(-self.x, -self.y, -self.z)

    def dot(self, o: "Vec3") -> float:
        return self.x * o.x + self.y * o.y + self.z * o.z

    def cross(self, o: "Vec3") -> "Vec3":
        return Vec3(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def normalized(self) -> "Vec3":
        n = self.norm()
        if n < 1e-12:
            raise InputDomainError("cannot normalize a zero-length vector")
        return Vec3(self.x / n, self.y / n, self.z / n)

    def lerp(self, o: "Vec3", a: float) -> "Vec3":
        return Vec3(
            self.x + (o.x - self.x) * a,
            self.y + (o.y - self.y) * a,
            self.z + (o.z - self.z) * a,
        )

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


ZERO = Vec3(0.0, 0.0, 0.0)
UP = Vec3(0.0, 1.0, 0.0)


@dataclass(frozen=True, slots=True)
class UnitQuat:
    """Unit quaternion (w, x, y, z); norm is kept within 1e-9 of 1."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        n = math.sqrt(self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z)
        if abs(n - 1.0) > 1e-6:
            raise InputDomainError(f"quaternion norm {n} too far from 1")
        if abs(n - 1.0) > UNIT_TOL:
            object.__setattr__(self, "w", self.w / n)
            object.__setattr__(self, "x", self.x / n)
            object.__setattr__(self, "y", self.y / n)
            object.__setattr__(self, "z", self.z / n)

    @staticmethod
    def identity() -> "UnitQuat":
        return UnitQuat(1.0, 0.0, 0.0, 0.0)

    @staticmethod
    def from_axis_angle(axis: Vec3, angle: float) -> "UnitQuat":
        a = axis.normalized()
        h = angle * 0.5
        s = math.sin(h)
        return UnitQuat(math.cos(h), a.x * s, a.y * s, a.z * s)

    @staticmethod
    def from_wxyz(w: float, x: float, y: float, z: float) -> "UnitQuat":
        n = math.sqrt(w * w + x * x + y * y + z * z)
        if n < 1e-12:
            raise InputDomainError("zero quaternion")
        if abs(n - 1.0) <= UNIT_TOL:
            return UnitQuat(w, x, y, z)  # keep bits of already-unit input
        return UnitQuat(w / n, x / n, y / n, z / n)

    def __mul__(self, o: "UnitQuat") -> "UnitQuat":
        return UnitQuat(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )

    def conjugate(self) -> "UnitQuat":
        return UnitQuat(self.w, -self.x, -self.y, -self.z)

    def rotate(self, v: Vec3) -> Vec3:
        # q v q* expanded; avoids building intermediate quaternions.
        qw, qx, qy, qz = self.w, self.x, self.y, self.z
        tx = 2.0 * (qy * v.z - qz * v.y)
        ty = 2.0 * (qz * v.x - qx * v.z)
        tz = 2.0 * (qx * v.y - qy * v.x)
        return Vec3(
            v.x + qw * tx + (qy * tz - qz * ty),
            v.y + qw * ty + (qz * tx - qx * tz),
            v.z + qw * tz + (qx * ty - qy * tx),
        )

    def dot(self, o: "UnitQuat") -> float:
        return self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z

    def slerp(self, o: "UnitQuat", a: float) -> "UnitQuat":
        """Spherical interpolation along the shorter arc."""
        d = self.dot(o)
        ow, ox, oy, oz = o.w, o.x, o.y, o.z
        if d < 0.0:
            d = -d
            ow, ox, oy, oz = -ow, -ox, -oy, -oz
        if d > 1.0 - 1e-10:
            # Nearly parallel: normalized lerp avoids sin(0)/0.
            return UnitQuat.from_wxyz(
                self.w + (ow - self.w) * a,
                self.x + (ox - self.x) * a,
                self.y + (oy - self.y) * a,
                self.z + (oz - self.z) * a,
            )
        theta = math.acos(max(-1.0, min(1.0, d)))
        s = math.sin(theta)
        c0 = math.sin((1.0 - a) * theta) / s
        c1 = math.sin(a * theta) / s
        return UnitQuat.from_wxyz(
            c0 * self.w + c1 * ow,
            c0 * self.x + c1 * ox,
            c0 * self.y + c1 * oy,
            c0 * self.z + c1 * oz,
        )

    def forward(self) -> Vec3:
        """Local -Z in world coordinates."""
        return self.rotate(Vec3(0.0, 0.0, -1.0))

    def right(self) -> Vec3:
        return self.rotate(Vec3(1.0, 0.0, 0.0))

    def up(self) -> Vec3:
        return self.rotate(Vec3(0.0, 1.0, 0.0))


def look_rotation(forward: Vec3, up: Vec3 = UP) -> UnitQuat:
    """Orientation whose local -Z points along `forward`, roll fixed by `up`."""
    f = forward.normalized()
    r = up.cross(-f)
    if r.norm() < 1e-9:
        # forward parallel to up: pick any perpendicular right axis.
        r = Vec3(1.0, 0.0, 0.0).cross(-f)
        if r.norm() < 1e-9:
            r = Vec3(0.0, 0.0, 1.0).cross(-f)
    r = r.normalized()
    u = (-f).cross(r)
    # Columns of the rotation matrix are (right, up, back).
    b = -f
    m00, m01, m02 = r.x, u.x, b.x
    m10, m11, m12 = r.y, u.y, b.y
    m20, m21, m22 = r.z, u.z, b.z
    tr = m00 + m11 + m22
    if tr > 0.0:
        s = math.sqrt(tr + 1.0) * 2.0
        return UnitQuat.from_wxyz(0.25 * s, (m21 - m12) / s, (m02 - m20) / s, (m10 - m01) / s)
    if m00 > m11 and m00 > m22:
        s = math.sqrt(1.0 + m00 - m11 - m22) * 2.0
        return UnitQuat.from_wxyz((m21 - m12) / s, 0.25 * s, (m01 + m10) / s, (m02 + m20) / s)
    if m11 > m22:
        s = math.sqrt(1.0 + m11 - m00 - m22) * 2.0
        return UnitQuat.from_wxyz((m02 - m20) / s, (m01 + m10) / s, 0.25 * s, (m12 + m21) / s)
    s = math.sqrt(1.0 + m22 - m00 - m11) * 2.0
    return UnitQuat.from_wxyz((m10 - m01) / s, (m02 + m20) / s, (m12 + m21) / s, 0.25 * s)


@dataclass(frozen=True, slots=True)
class Pose:
    position: Vec3
    orientation: UnitQuat

    @staticmethod
    def identity() -> "Pose":
        return Pose(ZERO, UnitQuat.identity())

    def apply(self, p: Vec3) -> Vec3:
        """Local point -> world."""
        return self.position + self.orientation.rotate(p)

    def inverse_apply(self, p: Vec3) -> Vec3:
        """World point -> local."""
        return self.orientation.conjugate().rotate(p - self.position)

    def compose(self, o: "Pose") -> "Pose":
        """self ∘ o: apply `o` first, then `self`."""
        return Pose(self.apply(o.position), self.orientation * o.orientation)

    def inverse(self) -> "Pose":
        qi = self.orientation.conjugate()
        return Pose(qi.rotate(-self.position), qi)

    def interpolate(self, o: "Pose", a: float) -> "Pose":
        return Pose(self.position.lerp(o.position, a), self.orientation.slerp(o.orientation, a))


@dataclass(frozen=True, slots=True)
class CameraIntrinsics:
    vertical_fov: float
    width_px: int
    height_px: int
    near: float = 0.05
    far: float = 200.0

    def __post_init__(self) -> None:
        if not (0.0 < self.vertical_fov < math.pi):
            raise InputDomainError(f"vertical_fov {self.vertical_fov} outside (0, pi)")
        if self.width_px <= 0 or self.height_px <= 0:
            raise InputDomainError("viewport dimensions must be positive")
        if not (0.0 < self.near < self.far):
            raise InputDomainError("need 0 < near < far")

    @property
    def aspect(self) -> float:
        return self.width_px / self.height_px

    @property
    def tan_half_fov(self) -> float:
        return math.tan(self.vertical_fov * 0.5)


@dataclass(frozen=True, slots=True)
class Ray:
    origin: Vec3
    direction: Vec3

    def __post_init__(self) -> None:
        if abs(self.direction.norm() - 1.0) > 1e-6:
            raise InputDomainError("ray direction must be unit length")

    def at(self, t: float) -> Vec3:
        return self.origin + self.direction * t


@dataclass(frozen=True, slots=True)
class Hit:
    object_id: str
    t: float
    point: Vec3
    normal: Vec3
    triangle_index: int


def project(
    point: Vec3, camera_pose: Pose, intr: CameraIntrinsics
) -> tuple[float, float, float] | None:
    """World point -> (x_px, y_px, depth), or None when outside the frustum.

    Depth is camera-space distance along -Z; inside means near <= depth <= far
    and the normalized image coordinates land within the viewport.
    """
    p = camera_pose.inverse_apply(point)
    depth = -p.z
    if not (intr.near <= depth <= intr.far):
        return None
    th = intr.tan_half_fov
    x_ndc = p.x / (depth * th * intr.aspect)
    y_ndc = p.y / (depth * th)
    # tolerance keeps edge pixels inside despite rotate/unrotate round-off
    if not (abs(x_ndc) <= 1.0 + 1e-9 and abs(y_ndc) <= 1.0 + 1e-9):
        return None
    x_px = (x_ndc * 0.5 + 0.5) * intr.width_px
    y_px = (0.5 - y_ndc * 0.5) * intr.height_px
    return (x_px, y_px, depth)


def unproject(x_px: float, y_px: float, camera_pose: Pose, intr: CameraIntrinsics) -> Ray:
    """Pixel coordinate -> world-space ray from the camera position."""
    if not (0 <= x_px < intr.width_px and 0 <= y_px < intr.height_px):
        raise InputDomainError(
            f"pixel ({x_px}, {y_px}) outside viewport {intr.width_px}x{intr.height_px}"
        )
    th = intr.tan_half_fov
    x_ndc = 2.0 * x_px / intr.width_px - 1.0
    y_ndc = 1.0 - 2.0 * y_px / intr.height_px
    d_cam = Vec3(x_ndc * th * intr.aspect, y_ndc * th, -1.0).normalized()
    return Ray(camera_pose.position, camera_pose.orientation.rotate(d_cam))


# Minimum hit distance; avoids self-intersection at the ray origin.
MIN_HIT_T = 1e-6


def intersect_triangle(
    origin: Vec3, direction: Vec3, v0: Vec3, v1: Vec3, v2: Vec3
) -> float | None:
    """Möller–Trumbore; returns t >= MIN_HIT_T or None. Both faces count."""
    e1 = v1 - v0
    e2 = v2 - v0
    h = direction.cross(e2)
    a = e1.dot(h)
    if abs(a) < 1e-12:
        return None
    f = 1.0 / a
    s = origin - v0
    u = f * s.dot(h)
    if u < 0.0 or u > 1.0:
        return None
    q = s.cross(e1)
    v = f * direction.dot(q)
    if v < 0.0 or u + v > 1.0:
        return None
    t = f * e2.dot(q)
    if t < MIN_HIT_T:
        return None
    return t


def triangle_normal_facing(v0: Vec3, v1: Vec3, v2: Vec3, direction: Vec3) -> Vec3:
    """Unit triangle normal flipped so it faces against `direction`."""
    n = (v1 - v0).cross(v2 - v0).normalized()
    if n.dot(direction) > 0.0:
        n = -n
    return n
