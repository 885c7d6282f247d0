import json

import numpy as np
import pytest

from funnel.fixtures import make_task_a_scenario, write_demo_files
from funnel.geom import Pose, UnitQuat, Vec3
from funnel.scenario import (
    Playback,
    ScenarioEvent,
    ScenarioScript,
    advance,
    avatar_event,
    load_scenario,
)
from funnel.scene import SceneFormatError


def _pose(x, y, z, q=None):
    return Pose(Vec3(x, y, z), q or UnitQuat.identity())


def _script_two_keyframes():
    return ScenarioScript([
        avatar_event(0.0, _pose(0, 0, 0), _pose(0, 0, 0), _pose(0, 0, 0)),
        avatar_event(2.0, _pose(2, 0, 0), _pose(2, 0, 0), _pose(2, 0, 0)),
    ])


def test_midpoint_interpolation():
    state, _ = advance(_script_two_keyframes(), 0.0, 1.0)
    assert state.head.position.as_tuple() == pytest.approx((1, 0, 0), abs=1e-12)


def test_keyframe_timestamps_reproduce_exactly():
    qa = UnitQuat.from_axis_angle(Vec3(0, 1, 0), 0.8)
    qb = UnitQuat.from_axis_angle(Vec3(1, 0, 0), -0.5)
    script = ScenarioScript([
        avatar_event(0.0, _pose(0, 1, 0, qa), _pose(0, 0, 0), _pose(0, 0, 0)),
        avatar_event(3.0, _pose(5, 1, -2, qb), _pose(1, 0, 0), _pose(-1, 0, 0)),
    ])
    s0, _ = advance(script, 0.0, 0.0)
    s1, _ = advance(script, 0.0, 3.0)
    assert s0.head.position == Vec3(0, 1, 0)
    assert s0.head.orientation == qa
    assert s1.head.position == Vec3(5, 1, -2)
    assert s1.head.orientation == qb


def test_orientation_slerp_halfway():
    qa = UnitQuat.identity()
    qb = UnitQuat.from_axis_angle(Vec3(0, 1, 0), 1.0)
    script = ScenarioScript([
        avatar_event(0.0, _pose(0, 0, 0, qa), _pose(0, 0, 0), _pose(0, 0, 0)),
        avatar_event(2.0, _pose(0, 0, 0, qb), _pose(0, 0, 0), _pose(0, 0, 0)),
    ])
    state, _ = advance(script, 0.0, 1.0)
    halfway = UnitQuat.from_axis_angle(Vec3(0, 1, 0), 0.5)
    assert state.head.orientation.dot(halfway) == pytest.approx(1.0, abs=1e-9)


def test_event_emitted_exactly_once_across_windows():
    script = ScenarioScript([
        avatar_event(0.0, _pose(0, 0, 0), _pose(0, 0, 0), _pose(0, 0, 0)),
        ScenarioEvent(1.0, "speak", {"text": "hi", "duration": 1.0}),
        avatar_event(2.0, _pose(1, 0, 0), _pose(0, 0, 0), _pose(0, 0, 0)),
    ])
    _, e1 = advance(script, 0.0, 0.9999)
    _, e2 = advance(script, 0.9999, 1.0)
    _, e3 = advance(script, 1.0, 2.0)
    speaks = [e for e in e1 + e2 + e3 if e.type == "speak"]
    assert len(speaks) == 1


def test_partition_conservation_random_windows(rng):
    script = make_task_a_scenario()
    end = script.end_t
    cuts = np.sort(rng.uniform(0, end, 40))
    playback = Playback(script)
    collected = []
    for c in list(cuts) + [end]:
        _, events = playback.step(float(c))
        collected.extend(events)
    assert len(collected) == len(script.events)
    assert [(e.t, e.type) for e in collected] == [(e.t, e.type) for e in script.events]


def test_beyond_end_holds_final_state():
    script = _script_two_keyframes()
    state, events = advance(script, 2.0, 99.0)
    assert events == []
    assert state.head.position.as_tuple() == (2, 0, 0)


def test_from_after_to_rejected():
    with pytest.raises(ValueError):
        advance(_script_two_keyframes(), 2.0, 1.0)


def test_unsorted_events_rejected():
    with pytest.raises(SceneFormatError):
        ScenarioScript([
            ScenarioEvent(2.0, "speak", {"text": "a", "duration": 1}),
            ScenarioEvent(1.0, "speak", {"text": "b", "duration": 1}),
        ])


def test_grab_release_alternation_enforced():
    with pytest.raises(SceneFormatError):
        ScenarioScript([ScenarioEvent(1.0, "release_main_camera", {})])
    with pytest.raises(SceneFormatError):
        ScenarioScript([
            ScenarioEvent(1.0, "grab_main_camera", {}),
            ScenarioEvent(2.0, "grab_main_camera", {}),
        ])


def test_playback_determinism(rng):
    script = make_task_a_scenario()
    cuts = np.sort(rng.uniform(0, script.end_t, 25))

    def run():
        pb = Playback(script)
        out = []
        for c in cuts:
            state, events = pb.step(float(c))
            out.append((state.head.position.as_tuple(), tuple((e.t, e.type) for e in events)))
        return out

    assert run() == run()


def test_load_scenario_round_trip(tmp_path):
    write_demo_files(tmp_path)
    script = load_scenario(tmp_path / "task_a.scenario.jsonl")
    built = make_task_a_scenario()
    assert len(script.events) == len(built.events)
    assert [(e.t, e.type) for e in script.events] == [(e.t, e.type) for e in built.events]


def test_load_scenario_rejects_unknown_type(tmp_path):
    p = tmp_path / "bad.scenario.jsonl"
    p.write_text(json.dumps({"t": 0, "type": "teleport"}) + "\n")
    with pytest.raises(SceneFormatError, match="teleport"):
        load_scenario(p)
