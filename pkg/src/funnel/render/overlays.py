"""Overlay types and the full frame composition pipeline.

Overlay items carry an audience: headset-only and spectator-only items are
drawn exclusively into their audience's frames, targets are visible to
everyone, selection outlines are drawn for all audiences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..geom import CameraIntrinsics, InputDomainError, Pose, Vec3
from ..scenario import AvatarState
from ..scene import Scene
from .raster import (
    BACKGROUND,
    Frame,
    FrameBuffers,
    avatar_proxy_triangles,
    downscale_box,
    draw_polyline_3d,
    draw_strokes_2d,
    rasterize_triangles,
)

ANNOTATION_COLOR = (255, 0, 0)
TARGET_COLOR = (0, 120, 255)
OUTLINE_COLOR = (255, 210, 0)
TARGET_RADIUS_M = 0.08
TARGET_SEGMENTS = 24
OUTLINE_DILATION_PX = 2
DEFAULT_STROKE_PX = 3

THUMBNAIL_W = 160
THUMBNAIL_H = 90


class Audience(str, Enum):
    VR_ONLY = "vr_only"
    SPECTATOR_ONLY = "spectator_only"
    EVERYONE = "everyone"


@dataclass(frozen=True, slots=True)
class Annotation:
    annotation_id: int
    audience: Audience
    points: tuple[Vec3, ...]
    color: tuple[int, int, int] = ANNOTATION_COLOR
    stroke_px: int = DEFAULT_STROKE_PX

    def __post_init__(self) -> None:
        if len(self.points) < 2:
            raise InputDomainError("annotation needs at least 2 points")
        if self.audience is Audience.EVERYONE:
            raise InputDomainError("annotations are scoped to one audience")


@dataclass(frozen=True, slots=True)
class Target:
    target_id: int
    position: Vec3
    normal: Vec3
    radius_m: float = TARGET_RADIUS_M


@dataclass(slots=True)
class SelectionSet:
    object_ids: set[str] = field(default_factory=set)

    def toggle(self, object_id: str) -> bool:
        """Returns True if the object is selected after the toggle."""
        if object_id in self.object_ids:
            self.object_ids.remove(object_id)
            return False
        self.object_ids.add(object_id)
        return True


@dataclass(slots=True)
class WindowedAnnotation:
    snapshot: Frame
    strokes_2d: list[list[tuple[float, float]]]
    composited: Frame


@dataclass(slots=True)
class OverlaySet:
    annotations: list[Annotation] = field(default_factory=list)
    targets: list[Target] = field(default_factory=list)
    selection: SelectionSet = field(default_factory=SelectionSet)
    windowed: list[WindowedAnnotation] = field(default_factory=list)


def _disc_triangles(t: Target) -> np.ndarray:
    n = t.normal.normalized()
    ref = Vec3(0.0, 1.0, 0.0) if abs(n.y) < 0.9 else Vec3(1.0, 0.0, 0.0)
    u = ref.cross(n).normalized()
    v = n.cross(u)
    center = t.position + n * 1e-3  # lift off the surface it sits on
    tris = []
    prev = center + u * t.radius_m
    for k in range(1, TARGET_SEGMENTS + 1):
        ang = 2.0 * math.pi * k / TARGET_SEGMENTS
        cur = center + u * (t.radius_m * math.cos(ang)) + v * (t.radius_m * math.sin(ang))
        tris.append([center.as_tuple(), prev.as_tuple(), cur.as_tuple()])
        prev = cur
    return np.array(tris)


def outline_pass(bufs: FrameBuffers, selected_indices: set[int]) -> None:
    """Recolor the screen-space silhouette boundary of selected objects:
    id-buffer edge detection followed by a 2 px dilation."""
    if not selected_indices:
        return
    ids = bufs.obj_idx
    mask = None
    for idx in sorted(selected_indices):
        eq = ids == idx
        mask = eq if mask is None else (mask | eq)
    if not mask.any():
        return
    interior = np.zeros_like(mask)
    interior[1:-1, 1:-1] = (
        mask[1:-1, 1:-1]
        & mask[:-2, 1:-1]
        & mask[2:, 1:-1]
        & mask[1:-1, :-2]
        & mask[1:-1, 2:]
    )
    edge = mask & ~interior
    out = edge.copy()
    for _ in range(OUTLINE_DILATION_PX):
        grown = out.copy()
        grown[1:, :] |= out[:-1, :]
        grown[:-1, :] |= out[1:, :]
        grown[:, 1:] |= out[:, :-1]
        grown[:, :-1] |= out[:, 1:]
        grown[1:, 1:] |= out[:-1, :-1]
        grown[1:, :-1] |= out[:-1, 1:]
        grown[:-1, 1:] |= out[1:, :-1]
        grown[:-1, :-1] |= out[1:, 1:]
        out = grown
    bufs.rgb[out] = np.array(OUTLINE_COLOR, dtype=np.uint8)


def render(
    scene: Scene,
    avatar: AvatarState | None,
    camera_pose: Pose,
    intr: CameraIntrinsics,
    overlays: OverlaySet | None,
    audience_filter: Audience,
    camera_label: str = "free",
    pts: int = 0,
    background: tuple[int, int, int] = BACKGROUND,
) -> Frame:
    """Full frame: scene mesh pass, avatar proxy, audience-scoped overlay
    passes, then selection outlines."""
    bufs = FrameBuffers.blank(intr.width_px, intr.height_px, background)
    arrays = scene.packed_arrays()
    rasterize_triangles(
        bufs, arrays["verts"], arrays["colors"], arrays["owners"], camera_pose, intr
    )
    if avatar is not None:
        tris, colors = avatar_proxy_triangles(avatar.head, avatar.left_hand, avatar.right_hand)
        rasterize_triangles(bufs, tris, colors, None, camera_pose, intr)
    if overlays is not None:
        for t in overlays.targets:
            rasterize_triangles(
                bufs,
                _disc_triangles(t),
                np.tile(np.array(TARGET_COLOR, dtype=np.float64), (TARGET_SEGMENTS, 1)),
                None,
                camera_pose,
                intr,
                lit=False,
                depth_bias=1e-4,
            )
        for ann in overlays.annotations:
            if audience_filter is not Audience.EVERYONE and ann.audience is not audience_filter:
                continue
            pts_np = np.array([p.as_tuple() for p in ann.points])
            draw_polyline_3d(bufs, pts_np, camera_pose, intr, ann.color, ann.stroke_px)
        sel = overlays.selection.object_ids
        if sel:
            idx = {o.object_id: i for i, o in enumerate(scene.objects)}
            outline_pass(bufs, {idx[oid] for oid in sel if oid in idx})
    return Frame(intr.width_px, intr.height_px, bufs.rgb, camera_label, pts)


THUMBNAIL_SUPERSAMPLE = 4


def render_thumbnail(
    scene: Scene,
    avatar: AvatarState | None,
    camera_pose: Pose,
    overlays: OverlaySet | None,
    camera_label: str,
    pts: int = 0,
    fov: float = math.pi / 3,
) -> Frame:
    """Thumbnail rendered supersampled and box-filtered down, so it equals
    a downscaled full-resolution render of the same rig."""
    intr = CameraIntrinsics(
        vertical_fov=fov,
        width_px=THUMBNAIL_W * THUMBNAIL_SUPERSAMPLE,
        height_px=THUMBNAIL_H * THUMBNAIL_SUPERSAMPLE,
    )
    full = render(
        scene, avatar, camera_pose, intr, overlays,
        Audience.SPECTATOR_ONLY, camera_label, pts,
    )
    small = downscale_box(full.pixels, THUMBNAIL_SUPERSAMPLE)
    return Frame(THUMBNAIL_W, THUMBNAIL_H, small, camera_label, pts)


def composite_windowed(
    snapshot: Frame,
    strokes_2d: list[list[tuple[float, float]]],
    stroke_px: int = DEFAULT_STROKE_PX,
) -> Frame:
    """Strokes rasterized in red over a copy of the snapshot."""
    out = snapshot.copy()
    draw_strokes_2d(out.pixels, strokes_2d, ANNOTATION_COLOR, stroke_px)
    return out
