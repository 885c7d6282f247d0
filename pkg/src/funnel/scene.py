"""Scene model and loader.

Scenes are custom JSON so object identity and selectability stay first-class:

    {
      "spawn": {"pos": [x, y, z], "quat": [w, x, y, z]},
      "objects": [
        {"id": "...", "name": "...", "color": [r, g, b], "selectable": true,
         "triangles": [[[x,y,z],[x,y,z],[x,y,z]], ...]},
        ...
      ]
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geom import Pose, UnitQuat, Vec3

RGB8 = tuple[int, int, int]
Triangle = tuple[Vec3, Vec3, Vec3]


class SceneFormatError(ValueError):
    """Scene file does not conform to the scene JSON format."""


@dataclass(slots=True)
class SceneObject:
    object_id: str
    display_name: str
    triangles: list[Triangle]
    base_color: RGB8
    selectable: bool = True


@dataclass(slots=True)
class Scene:
    objects: list[SceneObject]
    spawn_pose: Pose
    _arrays: dict | None = field(default=None, repr=False)

    def triangle_count(self) -> int:
        return sum(len(o.triangles) for o in self.objects)

    def object(self, object_id: str) -> SceneObject:
        for o in self.objects:
            if o.object_id == object_id:
                return o
        raise KeyError(object_id)

    def packed_arrays(self) -> dict:
        """Triangle soup as numpy arrays for the rasterizer (cached)."""
        if self._arrays is None:
            verts = []
            colors = []
            owners = []
            for oi, obj in enumerate(self.objects):
                for a, b, c in obj.triangles:
                    verts.append([a.as_tuple(), b.as_tuple(), c.as_tuple()])
                    colors.append(obj.base_color)
                    owners.append(oi)
            self._arrays = {
                "verts": np.array(verts, dtype=np.float64).reshape(-1, 3, 3),
                "colors": np.array(colors, dtype=np.float64).reshape(-1, 3),
                "owners": np.array(owners, dtype=np.int32),
            }
        return self._arrays


def pose_from_json(d: dict, where: str) -> Pose:
    try:
        px, py, pz = d["pos"]
        qw, qx, qy, qz = d["quat"]
    except (KeyError, TypeError, ValueError) as e:
        raise SceneFormatError(f"{where}: bad pose: {e}") from e
    return Pose(Vec3(float(px), float(py), float(pz)), UnitQuat.from_wxyz(qw, qx, qy, qz))


def pose_to_json(p: Pose) -> dict:
    return {
        "pos": [p.position.x, p.position.y, p.position.z],
        "quat": [p.orientation.w, p.orientation.x, p.orientation.y, p.orientation.z],
    }


def _parse_object(entry: dict, index: int) -> SceneObject:
    oid = entry.get("id")
    if not isinstance(oid, str) or not oid:
        raise SceneFormatError(f"objects[{index}]: missing or empty id")
    where = f"object {oid!r}"
    name = entry.get("name", oid)
    color = entry.get("color", [200, 200, 200])
    if not (isinstance(color, list) and len(color) == 3):
        raise SceneFormatError(f"{where}: color must be [r, g, b]")
    r, g, b = (int(c) for c in color)
    if not all(0 <= c <= 255 for c in (r, g, b)):
        raise SceneFormatError(f"{where}: color components must be 0..255")
    raw_tris = entry.get("triangles")
    if not isinstance(raw_tris, list) or not raw_tris:
        raise SceneFormatError(f"{where}: needs at least one triangle")
    tris: list[Triangle] = []
    for ti, tri in enumerate(raw_tris):
        try:
            (a, b_, c) = tri
            tris.append(
                (
                    Vec3(float(a[0]), float(a[1]), float(a[2])),
                    Vec3(float(b_[0]), float(b_[1]), float(b_[2])),
                    Vec3(float(c[0]), float(c[1]), float(c[2])),
                )
            )
        except (TypeError, ValueError, IndexError) as e:
            raise SceneFormatError(f"{where}: triangle {ti} malformed: {e}") from e
    return SceneObject(
        object_id=oid,
        display_name=str(name),
        triangles=tris,
        base_color=(r, g, b),
        selectable=bool(entry.get("selectable", True)),
    )


def scene_from_dict(doc: dict) -> Scene:
    if not isinstance(doc, dict):
        raise SceneFormatError("scene root must be a JSON object")
    raw_objects = doc.get("objects")
    if not isinstance(raw_objects, list) or not raw_objects:
        raise SceneFormatError("scene must contain a non-empty objects list")
    objects = [_parse_object(o, i) for i, o in enumerate(raw_objects)]
    seen: set[str] = set()
    for o in objects:
        if o.object_id in seen:
            raise SceneFormatError(f"duplicate object id {o.object_id!r}")
        seen.add(o.object_id)
    spawn = doc.get("spawn")
    spawn_pose = pose_from_json(spawn, "spawn") if spawn else Pose.identity()
    return Scene(objects=objects, spawn_pose=spawn_pose)


def load_scene(path: str | Path) -> Scene:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as e:
        raise SceneFormatError(f"{path}: not valid JSON: {e}") from e
    return scene_from_dict(doc)


def scene_to_dict(scene: Scene) -> dict:
    return {
        "spawn": pose_to_json(scene.spawn_pose),
        "objects": [
            {
                "id": o.object_id,
                "name": o.display_name,
                "color": list(o.base_color),
                "selectable": o.selectable,
                "triangles": [
                    [[v.x, v.y, v.z] for v in tri] for tri in o.triangles
                ],
            }
            for o in scene.objects
        ],
    }
