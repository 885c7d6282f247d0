"""Bounding-volume hierarchy over scene triangles for nearest-hit picking.

The index is immutable once built and safe to share across threads. Builds
are deterministic: median split on the longest centroid axis with stable
tie-breaking, so identical input always yields an identical tree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geom import Hit, Ray, Vec3, intersect_triangle, triangle_normal_facing

LEAF_SIZE = 4


@dataclass(frozen=True, slots=True)
class TriRef:
    object_id: str
    triangle_index: int
    v0: Vec3
    v1: Vec3
    v2: Vec3


@dataclass(slots=True)
class _Node:
    lo: np.ndarray
    hi: np.ndarray
    left: int = -1
    right: int = -1
    first: int = 0
    count: int = 0  # leaf iff count > 0


class SceneIndex:
    """Accelerated nearest-intersection queries over all scene triangles."""

    def __init__(self, tris: list[TriRef]):
        self.tris = tris
        self._nodes: list[_Node] = []
        self._order: list[int] = list(range(len(tris)))
        if tris:
            verts = np.array(
                [[t.v0.as_tuple(), t.v1.as_tuple(), t.v2.as_tuple()] for t in tris],
                dtype=np.float64,
            )
            self._lo = verts.min(axis=1)
            self._hi = verts.max(axis=1)
            self._centroids = verts.mean(axis=1)
            self._build(0, len(tris))

    @property
    def triangle_count(self) -> int:
        return len(self.tris)

    def leaf_references(self) -> list[int]:
        """Triangle indices as stored in leaves; covers every triangle once."""
        out: list[int] = []
        for n in self._nodes:
            if n.count > 0:
                out.extend(self._order[n.first : n.first + n.count])
        return out

    def _build(self, first: int, count: int) -> int:
        idx = np.array(self._order[first : first + count])
        lo = self._lo[idx].min(axis=0)
        hi = self._hi[idx].max(axis=0)
        node = _Node(lo=lo, hi=hi)
        node_id = len(self._nodes)
        self._nodes.append(node)
        if count <= LEAF_SIZE:
            node.first = first
            node.count = count
            return node_id
        cent = self._centroids[idx]
        axis = int(np.argmax(cent.max(axis=0) - cent.min(axis=0)))
        # Stable sort on (centroid, triangle id) keeps the build deterministic.
        keys = np.lexsort((idx, cent[:, axis]))
        ordered = idx[keys]
        self._order[first : first + count] = ordered.tolist()
        mid = count // 2
        node.left = self._build(first, mid)
        node.right = self._build(first + mid, count - mid)
        return node_id

    def raycast(self, ray: Ray) -> Hit | None:
        """Nearest hit with t >= MIN_HIT_T; ties broken by lower
        (object_id, triangle_index)."""
        if not self._nodes:
            return None
        o = np.array(ray.origin.as_tuple())
        d = np.array(ray.direction.as_tuple())
        inv = np.where(np.abs(d) > 1e-300, 1.0 / np.where(d == 0.0, 1.0, d), np.inf)
        inv = np.where(d == 0.0, np.inf, inv)

        best_t = np.inf
        best: TriRef | None = None

        def slab(node: _Node) -> float:
            t0 = (node.lo - o) * inv
            t1 = (node.hi - o) * inv
            tmin = np.minimum(t0, t1)
            tmax = np.maximum(t0, t1)
            # Axes with zero direction: inside the slab or miss.
            zero = np.isinf(inv)
            if np.any(zero & ((o < node.lo) | (o > node.hi))):
                return np.inf
            tmin = np.where(zero, -np.inf, tmin)
            tmax = np.where(zero, np.inf, tmax)
            enter = max(tmin.max(), 0.0)
            exit_ = tmax.min()
            return enter if enter <= exit_ else np.inf

        stack = [0]
        while stack:
            node = self._nodes[stack.pop()]
            enter = slab(node)
            if enter > best_t:
                continue
            if node.count > 0:
                for i in self._order[node.first : node.first + node.count]:
                    tr = self.tris[i]
                    t = intersect_triangle(ray.origin, ray.direction, tr.v0, tr.v1, tr.v2)
                    if t is None:
                        continue
                    if t < best_t or (
                        t == best_t
                        and best is not None
                        and (tr.object_id, tr.triangle_index)
                        < (best.object_id, best.triangle_index)
                    ):
                        best_t = t
                        best = tr
            else:
                # Near child first so pruning kicks in early.
                l, r = self._nodes[node.left], self._nodes[node.right]
                dl, dr = slab(l), slab(r)
                if dl <= dr:
                    if dr < np.inf:
                        stack.append(node.right)
                    if dl < np.inf:
                        stack.append(node.left)
                else:
                    if dl < np.inf:
                        stack.append(node.left)
                    if dr < np.inf:
                        stack.append(node.right)

        if best is None:
            return None
        point = ray.at(best_t)
        normal = triangle_normal_facing(best.v0, best.v1, best.v2, ray.direction)
        return Hit(
            object_id=best.object_id,
            t=best_t,
            point=point,
            normal=normal,
            triangle_index=best.triangle_index,
        )


def build_index(scene) -> SceneIndex:
    """Index every triangle of `scene` (anything exposing .objects with
    object_id and triangles)."""
    tris: list[TriRef] = []
    for obj in scene.objects:
        for i, (a, b, c) in enumerate(obj.triangles):
            tris.append(TriRef(obj.object_id, i, a, b, c))
    return SceneIndex(tris)
