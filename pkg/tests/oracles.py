"""Independent reference implementations used to check the fast paths.

Everything here is deliberately written against the *contract*, not against
the package internals: vectorized numpy instead of the package's scalar
math, exhaustive loops instead of acceleration structures.
"""

from __future__ import annotations

import math

import numpy as np

from funnel.geom import Ray


def pinhole_project(point, cam_pos, cam_quat, fov_v, width, height):
    """Hand-rolled pinhole projection: world point -> (x_px, y_px, depth).

    Camera looks along local -Z, +Y up; screen origin top-left, y down.
    Returns None outside the view volume (no near/far applied).
    """
    w, x, y, z = cam_quat
    # conjugate rotation (world -> camera) applied to (point - cam_pos)
    px, py, pz = (point[0] - cam_pos[0], point[1] - cam_pos[1], point[2] - cam_pos[2])
    # rotate by conjugate: q* v q
    cw, cx, cy, cz = w, -x, -y, -z
    tx = 2 * (cy * pz - cz * py)
    ty = 2 * (cz * px - cx * pz)
    tz = 2 * (cx * py - cy * px)
    rx = px + cw * tx + (cy * tz - cz * ty)
    ry = py + cw * ty + (cz * tx - cx * tz)
    rz = pz + cw * tz + (cx * ty - cy * tx)
    depth = -rz
    if depth <= 0:
        return None
    tan_half = math.tan(fov_v / 2)
    aspect = width / height
    x_ndc = rx / (depth * tan_half * aspect)
    y_ndc = ry / (depth * tan_half)
    if abs(x_ndc) > 1 or abs(y_ndc) > 1:
        return None
    return ((x_ndc + 1) / 2 * width, (1 - y_ndc) / 2 * height, depth)


def scene_triangle_table(scene):
    """(verts (N,3,3), object_ids list, tri_indices (N,)) for brute force."""
    verts = []
    ids = []
    tidx = []
    for obj in scene.objects:
        for i, (a, b, c) in enumerate(obj.triangles):
            verts.append([a.as_tuple(), b.as_tuple(), c.as_tuple()])
            ids.append(obj.object_id)
            tidx.append(i)
    return np.array(verts), ids, np.array(tidx)


def brute_force_raycast(verts, ids, tidx, ray: Ray, min_t=1e-6):
    """Loop over every triangle (vectorized Möller–Trumbore); nearest hit,
    ties broken by lower (object_id, triangle_index)."""
    o = np.array(ray.origin.as_tuple())
    d = np.array(ray.direction.as_tuple())
    v0 = verts[:, 0]
    e1 = verts[:, 1] - v0
    e2 = verts[:, 2] - v0
    h = np.cross(d, e2)
    a = np.einsum("ij,ij->i", e1, h)
    ok = np.abs(a) > 1e-12
    f = np.where(ok, 1.0 / np.where(a == 0, 1.0, a), 0.0)
    s = o - v0
    u = f * np.einsum("ij,ij->i", s, h)
    q = np.cross(s, e1)
    v = f * (q @ d)
    t = f * np.einsum("ij,ij->i", e2, q)
    ok &= (u >= 0) & (u <= 1) & (v >= 0) & (u + v <= 1) & (t >= min_t)
    if not ok.any():
        return None
    cand = np.nonzero(ok)[0]
    best = None
    for i in cand:
        key = (t[i], ids[i], int(tidx[i]))
        if best is None or key < best[0]:
            best = (key, i)
    (tt, oid, ti), i = best
    return oid, ti, tt


REF_LIGHT = np.array([-1.0, -1.0, -1.0]) / math.sqrt(3.0)
REF_AMBIENT = 0.35


def ray_reference_render(tri_list, colors, cam_pose, intr, background):
    """Reference renderer: one ray per pixel center, nearest triangle wins.

    tri_list: (N,3,3) world triangles; colors: (N,3) base colors 0..255.
    Returns (rgb uint8 (H,W,3), hit index int (H,W), depth (H,W)).
    """
    from funnel.geom import Vec3, unproject

    h, w = intr.height_px, intr.width_px
    rgb = np.empty((h, w, 3), dtype=np.uint8)
    rgb[:] = np.array(background, dtype=np.uint8)
    hit_idx = np.full((h, w), -1, dtype=np.int64)
    depth = np.full((h, w), np.inf)
    v0 = tri_list[:, 0]
    e1 = tri_list[:, 1] - v0
    e2 = tri_list[:, 2] - v0
    normals = np.cross(e1, e2)
    lens = np.linalg.norm(normals, axis=1)
    normals = normals / np.where(lens > 1e-12, lens, 1.0)[:, None]
    lam = np.abs(normals @ (-REF_LIGHT))
    shade = REF_AMBIENT + (1 - REF_AMBIENT) * np.maximum(lam, 0.0)
    lit = np.clip(np.rint(colors * shade[:, None]), 0, 255).astype(np.uint8)
    for yy in range(h):
        for xx in range(w):
            ray = unproject(xx + 0.5, yy + 0.5, cam_pose, intr)
            o = np.array(ray.origin.as_tuple())
            d = np.array(ray.direction.as_tuple())
            hvec = np.cross(d, e2)
            a = np.einsum("ij,ij->i", e1, hvec)
            ok = np.abs(a) > 1e-12
            f = np.where(ok, 1.0 / np.where(a == 0, 1.0, a), 0.0)
            s = o - v0
            u = f * np.einsum("ij,ij->i", s, hvec)
            q = np.cross(s, e1)
            v = f * (q @ d)
            t = f * np.einsum("ij,ij->i", e2, q)
            fwd_cos = d @ np.array(
                cam_pose.orientation.forward().as_tuple()
            )
            dcam = t * fwd_cos  # camera-space depth of the hit
            ok &= (u >= 0) & (u <= 1) & (v >= 0) & (u + v <= 1) & (dcam > intr.near)
            if not ok.any():
                continue
            cand = np.nonzero(ok)[0]
            best = cand[np.argmin(t[cand])]
            hit_idx[yy, xx] = best
            depth[yy, xx] = dcam[best]
            rgb[yy, xx] = lit[best]
    return rgb, hit_idx, depth


def random_scene_rays(scene, rng, n):
    """Rays from random interior positions toward random scene vertices,
    so most of them actually hit something."""
    verts, _, _ = scene_triangle_table(scene)
    flat = verts.reshape(-1, 3)
    lo = flat.min(axis=0)
    hi = flat.max(axis=0)
    rays = []
    from funnel.geom import Vec3

    for _ in range(n):
        origin = lo + (hi - lo) * rng.random(3) * np.array([0.9, 0.6, 0.9]) + np.array([0.02, 0.25, 0.02])
        target = flat[rng.integers(0, len(flat))] + rng.normal(0, 0.35, 3)
        d = target - origin
        norm = np.linalg.norm(d)
        if norm < 1e-9:
            d = np.array([0.0, 0.0, -1.0])
            norm = 1.0
        d = d / norm
        rays.append(Ray(Vec3(*origin), Vec3(*d)))
    return rays
