"""Z-buffered triangle rasterizer with an object-id buffer.

Per-pixel depth is stored as inverse camera depth (1/d, larger = nearer),
which interpolates linearly in screen space. Coverage is sampled at pixel
centers. Everything is deterministic: identical inputs give bit-identical
buffers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..geom import CameraIntrinsics, InputDomainError, Pose, Vec3

LIGHT_DIR = np.array([-1.0, -1.0, -1.0]) / math.sqrt(3.0)
AMBIENT = 0.35
BACKGROUND = (30, 34, 40)

HEAD_BOX = 0.22
HAND_BOX = 0.09
HEAD_COLOR = (226, 190, 160)
HAND_COLOR = (80, 96, 200)


@dataclass(slots=True)
class Frame:
    width: int
    height: int
    pixels: np.ndarray  # (H, W, 3) uint8
    camera_label: str = "free"
    pts: int = 0  # milliseconds

    def to_bytes(self) -> bytes:
        return self.pixels.tobytes()

    def copy(self) -> "Frame":
        return Frame(self.width, self.height, self.pixels.copy(), self.camera_label, self.pts)

    @staticmethod
    def from_bytes(data: bytes, width: int, height: int, label: str = "free", pts: int = 0) -> "Frame":
        px = np.frombuffer(data, dtype=np.uint8).reshape(height, width, 3).copy()
        return Frame(width, height, px, label, pts)


@dataclass(slots=True)
class FrameBuffers:
    rgb: np.ndarray  # (H, W, 3) uint8
    inv_depth: np.ndarray  # (H, W) float32, 0 = background
    obj_idx: np.ndarray  # (H, W) int32, -1 = none
    # scratch reused across triangles; owned by this buffer's single producer
    _f32: list = field(default_factory=list, repr=False)
    _b8: list = field(default_factory=list, repr=False)

    @staticmethod
    def blank(width: int, height: int, background: tuple[int, int, int] = BACKGROUND) -> "FrameBuffers":
        if width <= 0 or height <= 0:
            raise InputDomainError("viewport must be non-empty")
        rgb = np.empty((height, width, 3), dtype=np.uint8)
        rgb[:] = np.array(background, dtype=np.uint8)
        return FrameBuffers(
            rgb=rgb,
            inv_depth=np.zeros((height, width), dtype=np.float32),
            obj_idx=np.full((height, width), -1, dtype=np.int32),
        )

    def scratch(self) -> tuple[list, list]:
        if not self._f32:
            h, w = self.inv_depth.shape
            self._f32 = [np.empty((h, w), dtype=np.float32) for _ in range(4)]
            self._b8 = [np.empty((h, w), dtype=bool) for _ in range(2)]
        return self._f32, self._b8


def rotation_matrix(pose: Pose) -> np.ndarray:
    """3x3 local->world rotation from the pose orientation."""
    q = pose.orientation
    r = np.empty((3, 3))
    for col, axis in enumerate((Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1))):
        v = q.rotate(axis)
        r[:, col] = (v.x, v.y, v.z)
    return r


def shade(colors: np.ndarray, normals: np.ndarray) -> np.ndarray:
    """Flat shade: ambient plus one directional light, double-sided."""
    lam = np.abs(normals @ (-LIGHT_DIR))
    intensity = AMBIENT + (1.0 - AMBIENT) * np.maximum(lam, 0.0)
    return np.clip(np.rint(colors * intensity[:, None]), 0, 255)


def _clip_near(tri_cam: np.ndarray, near: float) -> list[np.ndarray]:
    """Sutherland–Hodgman clip of one camera-space triangle against the
    near plane z <= -near; returns 0..2 triangles."""
    inside = tri_cam[:, 2] <= -near
    if inside.all():
        return [tri_cam]
    if not inside.any():
        return []
    poly: list[np.ndarray] = []
    for i in range(3):
        a, b = tri_cam[i], tri_cam[(i + 1) % 3]
        ain, bin_ = inside[i], inside[(i + 1) % 3]
        if ain:
            poly.append(a)
        if ain != bin_:
            t = (-near - a[2]) / (b[2] - a[2])
            poly.append(a + (b - a) * t)
    tris = []
    for k in range(1, len(poly) - 1):
        tris.append(np.stack([poly[0], poly[k], poly[k + 1]]))
    return tris


def rasterize_triangles(
    bufs: FrameBuffers,
    verts_world: np.ndarray,
    colors: np.ndarray,
    owners: np.ndarray | None,
    camera_pose: Pose,
    intr: CameraIntrinsics,
    lit: bool = True,
    depth_bias: float = 0.0,
) -> None:
    """Rasterize a triangle soup into the buffers.

    verts_world: (N, 3, 3); colors: (N, 3) in 0..255; owners: (N,) int32
    indices written to the id buffer, or None to leave ids untouched.
    depth_bias: relative inverse-depth advantage in the z comparison, used
    by overlay geometry sitting exactly on surfaces.
    """
    n = verts_world.shape[0]
    if n == 0:
        return
    height, width = bufs.inv_depth.shape
    rot = rotation_matrix(camera_pose).T  # world->camera
    cam_pos = np.array(camera_pose.position.as_tuple())
    cam = (verts_world.reshape(-1, 3) - cam_pos) @ rot.T
    cam = cam.reshape(n, 3, 3)

    if lit:
        e1 = verts_world[:, 1] - verts_world[:, 0]
        e2 = verts_world[:, 2] - verts_world[:, 0]
        normals = np.cross(e1, e2)
        lens = np.linalg.norm(normals, axis=1)
        ok = lens > 1e-12
        normals[ok] /= lens[ok][:, None]
        shaded = shade(colors, normals)
    else:
        shaded = np.clip(np.rint(colors.astype(np.float64)), 0, 255)

    th = intr.tan_half_fov
    sx = 0.5 * width / (th * intr.aspect)
    sy = 0.5 * height / th

    depth = -cam[:, :, 2]
    behind = (depth < intr.near).all(axis=1)
    beyond = (depth > intr.far).all(axis=1)
    needs_clip = (depth < intr.near).any(axis=1) & ~behind

    # pixel-center coordinate templates shared by every triangle
    px_row = (np.arange(width, dtype=np.float32) + np.float32(0.5))
    py_col = (np.arange(height, dtype=np.float32) + np.float32(0.5))[:, None]
    colors_u8 = shaded.astype(np.uint8)

    # Front-to-back order maximizes early-z rejection. Coplanar ties at
    # shared edges stay image-invariant: such triangles share owner+color.
    order = np.argsort(depth.min(axis=1), kind="stable")
    for i in order:
        if behind[i] or beyond[i]:
            continue
        pieces = _clip_near(cam[i], intr.near) if needs_clip[i] else [cam[i]]
        for tri in pieces:
            d = -tri[:, 2]
            invd = 1.0 / d
            xs = width * 0.5 + tri[:, 0] * invd * sx
            ys = height * 0.5 - tri[:, 1] * invd * sy
            _fill_triangle(
                bufs, xs, ys, invd, colors_u8[i],
                int(owners[i]) if owners is not None else None,
                depth_bias, px_row, py_col,
            )


def _fill_triangle(
    bufs: FrameBuffers,
    xs: np.ndarray,
    ys: np.ndarray,
    invd: np.ndarray,
    color: np.ndarray,
    owner: int | None,
    depth_bias: float,
    px_row: np.ndarray,
    py_col: np.ndarray,
) -> None:
    height, width = bufs.inv_depth.shape
    area2 = (xs[1] - xs[0]) * (ys[2] - ys[0]) - (ys[1] - ys[0]) * (xs[2] - xs[0])
    if area2 == 0.0:
        return
    x0 = max(0, int(math.floor(xs.min())))
    x1 = min(width - 1, int(math.ceil(xs.max())))
    y0 = max(0, int(math.floor(ys.min())))
    y1 = min(height - 1, int(math.ceil(ys.max())))
    if x0 > x1 or y0 > y1:
        return
    px = px_row[x0 : x1 + 1]
    py = py_col[y0 : y1 + 1]
    f32, b8 = bufs.scratch()
    hh, ww = y1 - y0 + 1, x1 - x0 + 1
    npx = hh * ww
    e_min = f32[0].reshape(-1)[:npx].reshape(hh, ww)
    e_tmp = f32[1].reshape(-1)[:npx].reshape(hh, ww)
    w = f32[2].reshape(-1)[:npx].reshape(hh, ww)
    win = b8[0].reshape(-1)[:npx].reshape(hh, ww)
    # Edge functions e_k = A_k*x + B_k*y + C_k, oriented so inside is >= 0.
    s = 1.0 if area2 > 0.0 else -1.0
    coeffs = []
    for (xa, ya), (xb, yb) in (((xs[1], ys[1]), (xs[2], ys[2])),
                               ((xs[2], ys[2]), (xs[0], ys[0])),
                               ((xs[0], ys[0]), (xs[1], ys[1]))):
        coeffs.append((-s * (yb - ya), s * (xb - xa), s * (xa * yb - xb * ya)))
    for k, (a, b, c) in enumerate(coeffs):
        out = e_min if k == 0 else e_tmp
        np.add(np.float32(a) * px, np.float32(b) * py + np.float32(c), out=out)
        if k:
            np.minimum(e_min, e_tmp, out=e_min)
    # Inverse depth is affine in screen space: w = gx*x + gy*y + g0.
    inv_area = 1.0 / abs(area2)
    gx = sum(coeffs[k][0] * invd[k] for k in range(3)) * inv_area
    gy = sum(coeffs[k][1] * invd[k] for k in range(3)) * inv_area
    g0 = sum(coeffs[k][2] * invd[k] for k in range(3)) * inv_area
    np.add(np.float32(gx) * px, np.float32(gy) * py + np.float32(g0), out=w)
    zslice = bufs.inv_depth[y0 : y1 + 1, x0 : x1 + 1]
    if depth_bias:
        np.greater(w * np.float32(1.0 + depth_bias), zslice, out=win)
    else:
        np.greater(w, zslice, out=win)
    np.logical_and(win, e_min >= 0.0, out=win)
    if not win.any():
        return
    np.copyto(zslice, w, where=win)
    np.copyto(bufs.rgb[y0 : y1 + 1, x0 : x1 + 1], color, where=win[:, :, None])
    if owner is not None:
        np.copyto(bufs.obj_idx[y0 : y1 + 1, x0 : x1 + 1], np.int32(owner), where=win)


def project_points(
    points: np.ndarray, camera_pose: Pose, intr: CameraIntrinsics
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized pinhole projection; returns (xy (N,2), inv_depth (N,),
    in_front (N,) bool). Matches geom.project for in-frustum points."""
    rot = rotation_matrix(camera_pose).T
    cam_pos = np.array(camera_pose.position.as_tuple())
    cam = (points - cam_pos) @ rot.T
    d = -cam[:, 2]
    in_front = d >= intr.near
    d_safe = np.where(d <= 0, 1.0, d)
    th = intr.tan_half_fov
    x = (cam[:, 0] / (d_safe * th * intr.aspect) * 0.5 + 0.5) * intr.width_px
    y = (0.5 - cam[:, 1] / (d_safe * th) * 0.5) * intr.height_px
    return np.stack([x, y], axis=1), 1.0 / d_safe, in_front


def draw_polyline_3d(
    bufs: FrameBuffers,
    points: np.ndarray,
    camera_pose: Pose,
    intr: CameraIntrinsics,
    color: tuple[int, int, int],
    stroke_px: int,
    depth_bias: float = 2e-4,
) -> None:
    """Depth-anchored polyline billboarded to the camera with constant
    screen-space width. Segments crossing the near plane are clipped."""
    if len(points) < 2:
        return
    rot = rotation_matrix(camera_pose).T
    cam_pos = np.array(camera_pose.position.as_tuple())
    cam = (points - cam_pos) @ rot.T
    th = intr.tan_half_fov
    height, width = bufs.inv_depth.shape
    col = np.array(color, dtype=np.uint8)
    radius = max(0, (stroke_px - 1) // 2)
    offs = [
        (dx, dy)
        for dy in range(-radius, radius + 1)
        for dx in range(-radius, radius + 1)
        if dx * dx + dy * dy <= radius * radius + radius * 0.5
    ] or [(0, 0)]

    all_x: list[np.ndarray] = []
    all_y: list[np.ndarray] = []
    all_w: list[np.ndarray] = []
    for a, b in zip(cam[:-1], cam[1:]):
        seg = _clip_segment_near(a, b, intr.near)
        if seg is None:
            continue
        a, b = seg
        da, db = -a[2], -b[2]
        ax = (a[0] / (da * th * intr.aspect) * 0.5 + 0.5) * width
        ay = (0.5 - a[1] / (da * th) * 0.5) * height
        bx = (b[0] / (db * th * intr.aspect) * 0.5 + 0.5) * width
        by = (0.5 - b[1] / (db * th) * 0.5) * height
        length = math.hypot(bx - ax, by - ay)
        steps = max(2, int(length) + 1)
        ts = np.linspace(0.0, 1.0, steps)
        all_x.append(ax + (bx - ax) * ts)
        all_y.append(ay + (by - ay) * ts)
        # inverse depth interpolates linearly along the projected segment
        all_w.append(1.0 / da + (1.0 / db - 1.0 / da) * ts)
    if not all_x:
        return
    xs = np.concatenate(all_x)
    ys = np.concatenate(all_y)
    ws = np.concatenate(all_w)
    for dx, dy in offs:
        ix = np.floor(xs).astype(np.int64) + dx
        iy = np.floor(ys).astype(np.int64) + dy
        ok = (ix >= 0) & (ix < width) & (iy >= 0) & (iy < height)
        if not ok.any():
            continue
        ix, iy, w = ix[ok], iy[ok], ws[ok]
        win = w * (1.0 + depth_bias) > bufs.inv_depth[iy, ix]
        if not win.any():
            continue
        bufs.inv_depth[iy[win], ix[win]] = w[win]
        bufs.rgb[iy[win], ix[win]] = col


def _clip_segment_near(a: np.ndarray, b: np.ndarray, near: float) -> tuple[np.ndarray, np.ndarray] | None:
    ain = a[2] <= -near
    bin_ = b[2] <= -near
    if ain and bin_:
        return a, b
    if not ain and not bin_:
        return None
    t = (-near - a[2]) / (b[2] - a[2])
    mid = a + (b - a) * t
    return (a, mid) if ain else (mid, b)


def draw_strokes_2d(
    pixels: np.ndarray,
    strokes: list[list[tuple[float, float]]],
    color: tuple[int, int, int],
    stroke_px: int = 1,
) -> None:
    """Bresenham polylines straight into an RGB image, clipped to bounds."""
    height, width = pixels.shape[:2]
    col = np.array(color, dtype=np.uint8)
    side = max(1, stroke_px)
    half = (side - 1) // 2
    for stroke in strokes:
        pts = [(int(round(x)), int(round(y))) for x, y in stroke]
        if len(pts) == 1:
            pts = pts * 2
        for (x0, y0), (x1, y1) in zip(pts[:-1], pts[1:]):
            for x, y in _bresenham(x0, y0, x1, y1):
                for yy in range(y - half, y - half + side):
                    for xx in range(x - half, x - half + side):
                        if 0 <= xx < width and 0 <= yy < height:
                            pixels[yy, xx] = col


def _bresenham(x0: int, y0: int, x1: int, y1: int):
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x, y = x0, y0
    while True:
        yield x, y
        if x == x1 and y == y1:
            return
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy


def box_triangles(pose: Pose, size: float) -> np.ndarray:
    """12 triangles of an oriented cube centered at the pose."""
    h = size / 2.0
    corners = []
    for z in (-h, h):
        for y in (-h, h):
            for x in (-h, h):
                p = pose.apply(Vec3(x, y, z))
                corners.append(p.as_tuple())
    c = np.array(corners)
    # corner index: x + 2*y + 4*z (bit order)
    quads = [
        (0, 1, 3, 2),  # z-
        (4, 6, 7, 5),  # z+
        (0, 2, 6, 4),  # x-
        (1, 5, 7, 3),  # x+
        (0, 4, 5, 1),  # y-
        (2, 3, 7, 6),  # y+
    ]
    tris = []
    for a, b, cc, d in quads:
        tris.append([c[a], c[b], c[cc]])
        tris.append([c[a], c[cc], c[d]])
    return np.array(tris)


def avatar_proxy_triangles(head: Pose, left: Pose, right: Pose) -> tuple[np.ndarray, np.ndarray]:
    """Boxes standing in for the headset user's head and hands."""
    tris = np.concatenate(
        [box_triangles(head, HEAD_BOX), box_triangles(left, HAND_BOX), box_triangles(right, HAND_BOX)]
    )
    colors = np.concatenate(
        [
            np.tile(np.array(HEAD_COLOR, dtype=np.float64), (12, 1)),
            np.tile(np.array(HAND_COLOR, dtype=np.float64), (24, 1)),
        ]
    )
    return tris, colors


def downscale_box(pixels: np.ndarray, factor: int) -> np.ndarray:
    """Box-filter downscale by an integer factor."""
    h, w = pixels.shape[:2]
    if h % factor or w % factor:
        raise InputDomainError(f"dimensions {w}x{h} not divisible by {factor}")
    view = pixels.reshape(h // factor, factor, w // factor, factor, 3).astype(np.uint32)
    return np.rint(view.mean(axis=(1, 3))).astype(np.uint8)
