"""Engine-level integration: scenario playback drives rigs and audio."""

import pytest

from funnel.config import Config
from funnel.rig import RigMode
from funnel.service.runtime import Engine


def _config(**kw):
    base = dict(
        tick_hz=30,
        render_width=128,
        render_height=72,
        rungs=[{"name": "full", "width": 128, "height": 72}],
        segment_ms=500,
        window=4,
        live_edge_offset=2,
        token_seed="engine-test",
    )
    base.update(kw)
    return Config(**base)


def test_scenario_grab_episode_moves_free_camera():
    engine = Engine(_config())
    before = engine.session.rigs[RigMode.FREE].pose
    # the bundled escape-room script grabs at t=68 and releases at t=72
    while engine.scenario_t < 67.5:
        engine.step()
    assert engine.session.rigs[RigMode.FREE].pose == before
    while engine.scenario_t < 73.0:
        engine.step()
    rig = engine.session.rigs[RigMode.FREE]
    assert engine.grab_rejections == 0
    assert not rig.grabbed_by_vr  # released again
    assert rig.pose != before  # the headset user repositioned it
    # scripted final hand placement is (1.4, 2.0, 0.2); the camera sits at
    # the grab-time offset from the hand, so allow that margin
    assert rig.pose.position.as_tuple() == pytest.approx((1.4, 2.0, 0.2), abs=0.5)


def test_speak_events_route_audio_by_on_air():
    engine = Engine(_config())
    out = engine.apply_join("co", {"type": "join", "role": "co_host"})
    token = out[0][1]["session_token"]
    while engine.scenario_t < 3.0:  # first speak at t=2
        engine.step()
    assert engine.audio_counters["co_host"] == 1
    assert engine.audio_counters["spectator"] == 0
    engine.apply_command(token, "set_on_air", {"value": True})
    while engine.scenario_t < 17.0:  # second speak at t=16
        engine.step()
    assert engine.audio_counters["co_host"] == 2
    assert engine.audio_counters["spectator"] == 1
    assert engine.audio_counters["vr_host"] == 0  # nobody answered back


def test_touch_events_logged():
    engine = Engine(_config())
    while engine.scenario_t < 16.0:
        engine.step()
    assert ("instructions" in dict((oid, t) for t, oid in engine.touch_log).keys()
            or any(oid == "instructions" for _, oid in engine.touch_log))


def test_first_person_rig_tracks_head_through_playback():
    engine = Engine(_config())
    for _ in range(600):
        engine.step()
        assert engine.session.rigs[RigMode.FIRST_PERSON].pose == engine.avatar.head


def test_loop_scenario_wraps_cleanly():
    engine = Engine(_config(loop_scenario=True))
    total_ticks = int(92 * 30)  # past the 90 s script end
    for _ in range(total_ticks):
        engine.step()
    # wrapped: scenario time is small again and no grab state leaked
    assert engine.scenario_t % engine.script.end_t < 5.0
    assert not engine.session.rigs[RigMode.FREE].grabbed_by_vr


def test_sim_host_occupies_vr_slot():
    engine = Engine(_config())
    out = engine.apply_join("outsider", {"type": "join", "role": "vr_host"})
    assert out[0][1] == {"type": "rejected", "reason": "role_taken"}
    # and auto-answers offers relayed from a joined co-host
    engine.apply_join("co", {"type": "join", "role": "co_host"})
    replies = engine.sim_host_receive({"type": "offer", "blob": "x"})
    assert replies == [("co", {"type": "answer", "blob": replies[0][1]["blob"]})]
    assert replies[0][1]["blob"].startswith("sim-answer:")
