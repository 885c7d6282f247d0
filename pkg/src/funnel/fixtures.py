"""Programmatic demo content: two rooms and the scripted sessions that walk
an avatar through them.

Run ``python -m funnel.fixtures <outdir>`` to regenerate the bundled data
files; the builders are deterministic so the JSON output is stable.
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

from .geom import Pose, Vec3, look_rotation
from .scenario import ScenarioEvent, ScenarioScript, avatar_event, dump_scenario
from .scene import Scene, SceneObject, Triangle, scene_to_dict

# The demo free camera starts here; the escape-room script grabs it.
FREE_CAM_POS = Vec3(2.5, 1.6, 2.5)
FREE_CAM_LOOK = Vec3(-0.5, 1.2, -0.5)


def _quad(a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> list[Triangle]:
    return [(a, b, c), (a, c, d)]


def _box(center: Vec3, size: Vec3) -> list[Triangle]:
    hx, hy, hz = size.x / 2, size.y / 2, size.z / 2
    x0, x1 = center.x - hx, center.x + hx
    y0, y1 = center.y - hy, center.y + hy
    z0, z1 = center.z - hz, center.z + hz
    p = [Vec3(x, y, z) for z in (z0, z1) for y in (y0, y1) for x in (x0, x1)]
    quads = [
        (0, 2, 3, 1),  # z0
        (4, 5, 7, 6),  # z1
        (0, 4, 6, 2),  # x0
        (1, 3, 7, 5),  # x1
        (0, 1, 5, 4),  # y0
        (2, 6, 7, 3),  # y1
    ]
    tris: list[Triangle] = []
    for a, b, c, d in quads:
        tris.extend(_quad(p[a], p[b], p[c], p[d]))
    return tris


def _cylinder(center: Vec3, radius: float, height: float, segments: int = 16,
              cap_top: bool = False) -> list[Triangle]:
    tris: list[Triangle] = []
    y0, y1 = center.y, center.y + height
    ring0 = []
    ring1 = []
    for k in range(segments):
        ang = 2 * math.pi * k / segments
        x = center.x + radius * math.cos(ang)
        z = center.z + radius * math.sin(ang)
        ring0.append(Vec3(x, y0, z))
        ring1.append(Vec3(x, y1, z))
    for k in range(segments):
        a, b = ring0[k], ring0[(k + 1) % segments]
        c, d = ring1[(k + 1) % segments], ring1[k]
        tris.extend(_quad(a, b, c, d))
    bottom = Vec3(center.x, y0, center.z)
    for k in range(segments):
        tris.append((bottom, ring0[(k + 1) % segments], ring0[k]))
    if cap_top:
        top = Vec3(center.x, y1, center.z)
        for k in range(segments):
            tris.append((top, ring1[k], ring1[(k + 1) % segments]))
    return tris


def _room_shell(half: float, wall_h: float) -> list[SceneObject]:
    """Floor plus four walls; open top so the map view stays useful."""
    f = half
    objs = [
        SceneObject("floor", "Floor", _quad(
            Vec3(-f, 0, -f), Vec3(f, 0, -f), Vec3(f, 0, f), Vec3(-f, 0, f)
        ), (90, 110, 95), selectable=False),
        SceneObject("wall_north", "North wall", _quad(
            Vec3(-f, 0, -f), Vec3(-f, wall_h, -f), Vec3(f, wall_h, -f), Vec3(f, 0, -f)
        ), (150, 155, 160), selectable=False),
        SceneObject("wall_south", "South wall", _quad(
            Vec3(-f, 0, f), Vec3(f, 0, f), Vec3(f, wall_h, f), Vec3(-f, wall_h, f)
        ), (150, 155, 160), selectable=False),
        SceneObject("wall_west", "West wall", _quad(
            Vec3(-f, 0, -f), Vec3(-f, 0, f), Vec3(-f, wall_h, f), Vec3(-f, wall_h, -f)
        ), (144, 150, 156), selectable=False),
        SceneObject("wall_east", "East wall", _quad(
            Vec3(f, 0, -f), Vec3(f, wall_h, -f), Vec3(f, wall_h, f), Vec3(f, 0, f)
        ), (144, 150, 156), selectable=False),
    ]
    return objs


def make_escape_room() -> Scene:
    objs = _room_shell(4.0, 3.0)
    objs += [
        SceneObject("door", "Exit door", _box(Vec3(2.0, 1.1, -3.93), Vec3(1.0, 2.2, 0.12)),
                    (120, 80, 45)),
        SceneObject("table", "Potion table",
                    _box(Vec3(0.0, 0.86, -1.2), Vec3(1.6, 0.08, 0.8))
                    + _box(Vec3(-0.72, 0.41, -0.86), Vec3(0.07, 0.82, 0.07))
                    + _box(Vec3(0.72, 0.41, -0.86), Vec3(0.07, 0.82, 0.07))
                    + _box(Vec3(-0.72, 0.41, -1.54), Vec3(0.07, 0.82, 0.07))
                    + _box(Vec3(0.72, 0.41, -1.54), Vec3(0.07, 0.82, 0.07)),
                    (140, 100, 60)),
        SceneObject("cauldron", "Cauldron", _cylinder(Vec3(-1.8, 0.0, -1.6), 0.45, 0.62, 24),
                    (40, 90, 70)),
        SceneObject("wand", "Wand", _box(Vec3(0.3, 0.93, -1.25), Vec3(0.5, 0.04, 0.04)),
                    (210, 180, 120)),
        SceneObject("ingredient_sun", "Sunpetal jar", _box(Vec3(-0.35, 0.97, -1.1), Vec3(0.14, 0.14, 0.14)),
                    (230, 180, 60)),
        SceneObject("ingredient_moss", "Moss jar", _box(Vec3(-0.1, 0.97, -1.35), Vec3(0.14, 0.14, 0.14)),
                    (110, 170, 90)),
        SceneObject("instructions", "Instruction sheet", _quad(
            Vec3(-0.5, 1.3, 3.98), Vec3(-0.5, 2.0, 3.98), Vec3(0.5, 2.0, 3.98), Vec3(0.5, 1.3, 3.98)
        ), (235, 235, 225)),
        SceneObject("shelf", "Shelf",
                    _box(Vec3(-3.86, 1.5, 1.0), Vec3(0.25, 0.06, 1.6))
                    + _box(Vec3(-3.86, 1.0, 1.0), Vec3(0.25, 0.06, 1.6)),
                    (120, 95, 70)),
        SceneObject("potion_bottle", "Potion bottle",
                    _cylinder(Vec3(-3.86, 1.53, 0.7), 0.07, 0.24, 12, cap_top=True),
                    (90, 140, 200)),
        SceneObject("rug", "Rug", _quad(
            Vec3(-0.9, 0.004, 0.3), Vec3(0.9, 0.004, 0.3), Vec3(0.9, 0.004, 1.9), Vec3(-0.9, 0.004, 1.9)
        ), (130, 90, 110), selectable=False),
    ]
    spawn = Pose(Vec3(0.0, 1.6, 2.0), look_rotation(Vec3(0.0, 0.0, -1.0)))
    return Scene(objects=objs, spawn_pose=spawn)


def make_medical_room() -> Scene:
    objs = _room_shell(4.0, 3.0)
    objs += [
        SceneObject("bed", "Exam bed",
                    _box(Vec3(1.6, 0.55, -1.6), Vec3(0.9, 0.12, 2.1))
                    + _box(Vec3(1.6, 0.25, -1.6), Vec3(0.8, 0.5, 1.9)),
                    (200, 205, 215)),
        SceneObject("blood_pressure_cuff", "Blood pressure cuff",
                    _box(Vec3(1.25, 0.67, -0.8), Vec3(0.18, 0.1, 0.14)),
                    (90, 110, 180)),
        SceneObject("ecg_monitor", "ECG monitor",
                    _box(Vec3(2.8, 1.3, -2.6), Vec3(0.5, 0.4, 0.3))
                    + _box(Vec3(2.8, 0.55, -2.6), Vec3(0.1, 1.1, 0.1)),
                    (60, 70, 80)),
        SceneObject("ecg_electrodes", "ECG electrodes",
                    _box(Vec3(1.45, 0.64, -1.9), Vec3(0.08, 0.04, 0.08))
                    + _box(Vec3(1.6, 0.64, -2.0), Vec3(0.08, 0.04, 0.08))
                    + _box(Vec3(1.75, 0.64, -1.9), Vec3(0.08, 0.04, 0.08)),
                    (220, 220, 230)),
        SceneObject("cabinet", "Supply cabinet",
                    _box(Vec3(-3.5, 0.9, -2.5), Vec3(0.9, 1.8, 0.6)),
                    (170, 175, 185)),
        SceneObject("iv_stand", "IV stand",
                    _cylinder(Vec3(-1.8, 0.0, -2.8), 0.04, 1.9, 8, cap_top=True)
                    + _box(Vec3(-1.8, 1.95, -2.8), Vec3(0.5, 0.04, 0.04)),
                    (140, 145, 150)),
        SceneObject("sink", "Sink",
                    _box(Vec3(3.6, 0.85, 1.8), Vec3(0.7, 0.12, 0.55))
                    + _box(Vec3(3.6, 0.42, 1.8), Vec3(0.6, 0.74, 0.5)),
                    (210, 215, 220)),
        SceneObject("poster", "Anatomy poster", _quad(
            Vec3(-1.2, 1.2, 3.98), Vec3(-1.2, 2.2, 3.98), Vec3(0.2, 2.2, 3.98), Vec3(0.2, 1.2, 3.98)
        ), (200, 210, 190)),
    ]
    spawn = Pose(Vec3(0.0, 1.6, 1.5), look_rotation(Vec3(0.3, 0.0, -1.0)))
    return Scene(objects=objs, spawn_pose=spawn)


def _head_pose(pos: Vec3, look: Vec3) -> Pose:
    d = look - pos
    if Vec3(d.x, 0, d.z).norm() < 1e-6:
        d = Vec3(0, d.y, -1e-3) + d
    return Pose(pos, look_rotation(d))


def _hands_for(head: Pose) -> tuple[Pose, Pose]:
    left = Pose(head.apply(Vec3(-0.25, -0.45, -0.25)), head.orientation)
    right = Pose(head.apply(Vec3(0.25, -0.45, -0.25)), head.orientation)
    return left, right


def _kf(t: float, pos: Vec3, look: Vec3) -> ScenarioEvent:
    head = _head_pose(pos, look)
    left, right = _hands_for(head)
    return avatar_event(t, head, left, right)


def _kf_hands(t: float, pos: Vec3, look: Vec3, right_hand: Pose) -> ScenarioEvent:
    head = _head_pose(pos, look)
    left, _ = _hands_for(head)
    return avatar_event(t, head, left, right_hand)


def make_task_a_scenario() -> ScenarioScript:
    """Escape-room walkthrough: inspect props, stir the cauldron, grab and
    reposition the main camera, head for the door. ~90 seconds."""
    h = 1.6
    cam = Pose(FREE_CAM_POS, look_rotation(FREE_CAM_LOOK - FREE_CAM_POS))
    grab_hand = Pose(FREE_CAM_POS + Vec3(0.0, -0.15, 0.0), cam.orientation)
    ev: list[ScenarioEvent] = []
    ev.append(_kf(0.0, Vec3(0, h, 2.0), Vec3(0, 1.2, -2)))
    ev.append(ScenarioEvent(2.0, "speak", {"text": "Alright, let's find a way out of here.", "duration": 3.0}))
    ev.append(_kf(4.0, Vec3(0, h, 2.0), Vec3(-2, 1.2, 0)))
    ev.append(_kf(8.0, Vec3(0, h, 2.4), Vec3(0, 1.6, 4)))
    ev.append(_kf(14.0, Vec3(0, h, 3.2), Vec3(0, 1.7, 4)))
    ev.append(ScenarioEvent(15.0, "touch_object", {"object_id": "instructions"}))
    ev.append(ScenarioEvent(16.0, "speak", {"text": "Mix sunpetal and moss, then open the door.", "duration": 4.0}))
    ev.append(_kf(20.0, Vec3(0, h, 2.4), Vec3(0, 1.0, -1.2)))
    ev.append(_kf(27.0, Vec3(0.2, h, -0.3), Vec3(0.3, 0.9, -1.25)))
    ev.append(ScenarioEvent(32.0, "touch_object", {"object_id": "wand"}))
    ev.append(_kf(33.0, Vec3(0.2, h, -0.3), Vec3(-0.3, 0.95, -1.2)))
    ev.append(ScenarioEvent(36.0, "touch_object", {"object_id": "ingredient_sun"}))
    ev.append(_kf(40.0, Vec3(-0.8, h, -0.6), Vec3(-1.8, 0.5, -1.6)))
    ev.append(_kf(47.0, Vec3(-1.3, h, -0.9), Vec3(-1.8, 0.5, -1.6)))
    ev.append(ScenarioEvent(50.0, "touch_object", {"object_id": "cauldron"}))
    ev.append(ScenarioEvent(51.0, "speak", {"text": "Stirring the potion now.", "duration": 3.0}))
    ev.append(_kf(55.0, Vec3(-1.3, h, -0.9), Vec3(-1.8, 0.7, -1.6)))
    ev.append(_kf(62.0, Vec3(0.6, h, 0.8), Vec3(2.5, 1.5, 2.5)))
    # Walk to the main camera and reposition it for the finale.
    ev.append(_kf_hands(67.0, Vec3(2.1, h, 2.1), FREE_CAM_POS, grab_hand))
    ev.append(ScenarioEvent(68.0, "grab_main_camera", {}))
    ev.append(ScenarioEvent(69.0, "move_grabbed_camera", {"pose": _pose_json(
        Pose(Vec3(2.2, 1.8, 1.2), look_rotation(Vec3(2.0, 1.0, -3.9) - Vec3(2.2, 1.8, 1.2)))
    )}))
    ev.append(ScenarioEvent(70.5, "move_grabbed_camera", {"pose": _pose_json(
        Pose(Vec3(1.4, 2.0, 0.2), look_rotation(Vec3(2.0, 1.0, -3.9) - Vec3(1.4, 2.0, 0.2)))
    )}))
    ev.append(ScenarioEvent(72.0, "release_main_camera", {}))
    ev.append(ScenarioEvent(73.0, "speak", {"text": "Camera set on the door for the big exit.", "duration": 3.0}))
    ev.append(_kf(74.0, Vec3(1.8, h, 0.6), Vec3(2.0, 1.1, -3.9)))
    ev.append(_kf(82.0, Vec3(2.0, h, -2.6), Vec3(2.0, 1.1, -3.9)))
    ev.append(ScenarioEvent(85.0, "touch_object", {"object_id": "door"}))
    ev.append(ScenarioEvent(86.0, "speak", {"text": "It works! See you on the other side.", "duration": 3.0}))
    ev.append(_kf(90.0, Vec3(2.0, h, -3.2), Vec3(2.0, 1.4, -3.9)))
    return ScenarioScript(sorted(ev, key=lambda e: e.t))


def make_task_b_scenario() -> ScenarioScript:
    """Medical demo: narrated stops at the cuff, electrodes and monitor."""
    h = 1.6
    ev: list[ScenarioEvent] = []
    ev.append(_kf(0.0, Vec3(0, h, 1.5), Vec3(1.6, 0.6, -1.6)))
    ev.append(ScenarioEvent(3.0, "speak", {"text": "Today we measure blood pressure and run an ECG.", "duration": 5.0}))
    ev.append(_kf(8.0, Vec3(0.8, h, 0.2), Vec3(1.25, 0.67, -0.8)))
    ev.append(ScenarioEvent(12.0, "touch_object", {"object_id": "blood_pressure_cuff"}))
    ev.append(ScenarioEvent(13.0, "speak", {"text": "The cuff wraps snugly above the elbow.", "duration": 4.0}))
    ev.append(_kf(18.0, Vec3(1.0, h, -0.6), Vec3(1.6, 0.64, -1.95)))
    ev.append(ScenarioEvent(24.0, "touch_object", {"object_id": "ecg_electrodes"}))
    ev.append(ScenarioEvent(25.0, "speak", {"text": "Electrodes go in a triangle across the chest.", "duration": 4.0}))
    ev.append(_kf(30.0, Vec3(1.6, h, -1.2), Vec3(2.8, 1.3, -2.6)))
    ev.append(_kf(38.0, Vec3(2.2, h, -1.8), Vec3(2.8, 1.3, -2.6)))
    ev.append(ScenarioEvent(42.0, "touch_object", {"object_id": "ecg_monitor"}))
    ev.append(ScenarioEvent(43.0, "speak", {"text": "Watch the trace settle on the monitor.", "duration": 4.0}))
    ev.append(_kf(50.0, Vec3(0.6, h, 0.4), Vec3(-3.5, 0.9, -2.5)))
    ev.append(_kf(60.0, Vec3(-2.0, h, -1.2), Vec3(-3.5, 0.9, -2.5)))
    ev.append(ScenarioEvent(63.0, "touch_object", {"object_id": "cabinet"}))
    ev.append(ScenarioEvent(64.0, "speak", {"text": "Spare supplies live in this cabinet.", "duration": 3.0}))
    ev.append(_kf(72.0, Vec3(0, h, 1.0), Vec3(1.6, 0.6, -1.6)))
    ev.append(ScenarioEvent(75.0, "speak", {"text": "Questions from the audience are welcome now.", "duration": 4.0}))
    ev.append(_kf(80.0, Vec3(0, h, 1.5), Vec3(1.6, 0.8, -1.6)))
    return ScenarioScript(sorted(ev, key=lambda e: e.t))


def _pose_json(p: Pose) -> dict:
    return {
        "pos": [p.position.x, p.position.y, p.position.z],
        "quat": [p.orientation.w, p.orientation.x, p.orientation.y, p.orientation.z],
    }


def write_demo_files(outdir: str | Path) -> list[Path]:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, scene in (
        ("escape_room.scene.json", make_escape_room()),
        ("medical_room.scene.json", make_medical_room()),
    ):
        p = out / name
        p.write_text(json.dumps(scene_to_dict(scene), indent=1))
        written.append(p)
    for name, script in (
        ("task_a.scenario.jsonl", make_task_a_scenario()),
        ("task_b.scenario.jsonl", make_task_b_scenario()),
    ):
        p = out / name
        p.write_text("\n".join(dump_scenario(script)) + "\n")
        written.append(p)
    return written


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else str(Path(__file__).parent / "data")
    for path in write_demo_files(target):
        print(path)
