import math
import random

import numpy as np
import pytest

from funnel.bvh import build_index
from funnel.fixtures import make_escape_room
from funnel.geom import CameraIntrinsics, Pose, Vec3, look_rotation, unproject
from funnel.render.raster import Frame
from funnel.rig import RigMode, default_rigs
from funnel.session import (
    AudioPacket,
    AuthError,
    ConnState,
    Role,
    Session,
    ValidationError,
    route_audio,
)

INTR = CameraIntrinsics(vertical_fov=math.pi / 3, width_px=640, height_px=360)


def _session(frame_source=None):
    scene = make_escape_room()
    index = build_index(scene)
    cam = Pose(Vec3(2.5, 1.6, 2.5), look_rotation(Vec3(-0.5, 1.2, -0.5) - Vec3(2.5, 1.6, 2.5)))
    rigs = default_rigs(cam)
    return Session(scene, index, rigs, INTR, token_seed="test-seed", frame_source=frame_source)


def _join(session, client_id, role):
    out = session.handle_signal(client_id, {"type": "join", "role": role})
    assert out[0][1]["type"] == "role_assigned"
    return out[0][1]["session_token"]


@pytest.fixture
def live():
    s = _session(frame_source=lambda: Frame(64, 36, np.zeros((36, 64, 3), dtype=np.uint8), "free", 0))
    token = _join(s, "cohost-1", "co_host")
    _join(s, "vr-1", "vr_host")
    return s, token


# ---------------------------------------------------------------- signaling

def test_join_cohost_on_empty_session():
    s = _session()
    out = s.handle_signal("c1", {"type": "join", "role": "co_host"})
    assert len(out) == 1
    dest, msg = out[0]
    assert dest == "c1"
    assert msg["type"] == "role_assigned"
    assert msg["role"] == "co_host"
    assert msg["session_token"]


def test_second_cohost_rejected_role_taken():
    s = _session()
    _join(s, "c1", "co_host")
    out = s.handle_signal("c2", {"type": "join", "role": "co_host"})
    assert out[0][1] == {"type": "rejected", "reason": "role_taken"}


def test_spectator_join_redirected():
    s = _session()
    out = s.handle_signal("spec-1", {"type": "join", "role": "spectator"})
    assert out[0][1] == {"type": "rejected", "reason": "use_spectator_endpoint"}


def test_offer_answer_relay_reaches_connected():
    s = _session()
    _join(s, "host", "vr_host")
    _join(s, "co", "co_host")
    offer = {"type": "offer", "blob": "v=0 o=- 4815162342 fake-sdp é"}
    out = s.handle_signal("host", offer)
    assert out == [("co", offer)]
    assert out[0][1]["blob"] is offer["blob"]  # verbatim, not re-encoded
    answer = {"type": "answer", "blob": "answer-blob-123"}
    out = s.handle_signal("co", answer)
    assert out == [("host", answer)]
    assert s.connection_state("host") is ConnState.CONNECTED
    assert s.connection_state("co") is ConnState.CONNECTED


def test_candidate_relayed_to_counterpart():
    s = _session()
    _join(s, "host", "vr_host")
    _join(s, "co", "co_host")
    cand = {"type": "candidate", "blob": "candidate:1 1 UDP 2122"}
    assert s.handle_signal("co", cand) == [("host", cand)]


def test_offer_before_join_is_protocol_error():
    s = _session()
    out = s.handle_signal("stranger", {"type": "offer", "blob": "x"})
    assert out[0][1]["type"] == "error"
    assert s.connection_state("stranger") is None


def test_bye_frees_slot_for_reuse():
    s = _session()
    tok = _join(s, "c1", "co_host")
    s.handle_signal("c1", {"type": "bye"})
    assert s.handle_command(tok, "set_on_air", {"value": True}).ok is False
    _join(s, "c2", "co_host")  # slot reusable


def test_signal_fuzz_small_never_crashes_and_cardinality_holds(rng):
    s = _session()
    clients = [f"cl{i}" for i in range(8)]
    msgs = [
        {"type": "join", "role": "co_host"},
        {"type": "join", "role": "vr_host"},
        {"type": "join", "role": "spectator"},
        {"type": "offer", "blob": "B0"},
        {"type": "answer", "blob": "B1"},
        {"type": "candidate", "blob": "B2"},
        {"type": "bye"},
        {"type": "garbage"},
    ]
    r = random.Random(42)
    for _ in range(2000):
        cid = r.choice(clients)
        s.handle_signal(cid, r.choice(msgs))
        holders = [c for c, info in s.clients.items() if info.role is Role.CO_HOST]
        assert len(holders) <= 1
        holders = [c for c, info in s.clients.items() if info.role is Role.VR_HOST]
        assert len(holders) <= 1


# ----------------------------------------------------------------- commands

def test_invalid_token_rejected(live):
    s, _ = live
    res = s.handle_command("bogus", "set_on_air", {"value": True})
    assert not res.ok and "auth" in res.error


def test_vr_host_token_cannot_command():
    s = _session()
    vr_token = _join(s, "vr-1", "vr_host")
    res = s.handle_command(vr_token, "set_on_air", {"value": True})
    assert not res.ok and "auth" in res.error


def test_place_target_on_cauldron_pixel(live):
    s, token = live
    # find a pixel where the cauldron projects
    from funnel.geom import project

    cauldron_top = Vec3(-1.8, 0.3, -1.6)
    pose = s.rigs[s.active_rig].pose
    pr = project(cauldron_top, pose, INTR)
    assert pr is not None
    x, y, _ = pr
    res = s.handle_command(token, "place_target", {"x": x, "y": y})
    assert res.ok and not res.rejected
    # oracle: the stored position equals this pixel's raycast hit
    ray = unproject(x, y, pose, INTR)
    hit = s.index.raycast(ray)
    assert hit is not None
    assert res.data["position"] == pytest.approx(list(hit.point.as_tuple()), abs=1e-12)
    assert len(s.overlays.targets) == 1


def test_place_target_miss_rejected_no_state_change(live):
    s, token = live
    res = s.handle_command(token, "place_target", {"x": 320, "y": 2})  # sky
    assert res.ok and res.rejected
    assert s.overlays.targets == []


def test_place_target_out_of_bounds_names_field(live):
    s, token = live
    res = s.handle_command(token, "place_target", {"x": 99999, "y": 10})
    assert not res.ok and "x" in res.error


def test_select_object_toggle_involution(live):
    s, token = live
    from funnel.geom import project

    pose = s.rigs[s.active_rig].pose
    pr = project(Vec3(-1.8, 0.3, -1.6), pose, INTR)  # cauldron
    x, y, _ = pr
    r1 = s.handle_command(token, "select_object", {"x": x, "y": y})
    assert r1.ok and r1.data["selected"] is True
    r2 = s.handle_command(token, "select_object", {"x": x, "y": y})
    assert r2.ok and r2.data["selected"] is False
    assert s.overlays.selection.object_ids == set()


def test_select_non_selectable_rejected(live):
    s, token = live
    from funnel.geom import project

    pose = s.rigs[s.active_rig].pose
    pr = project(Vec3(0.0, 0.004, 1.2), pose, INTR)  # the rug, selectable=False
    assert pr is not None
    res = s.handle_command(token, "select_object", {"x": pr[0], "y": pr[1]})
    assert res.ok and res.rejected
    assert res.data["reason"] == "not_selectable"


def test_annotation_anchoring_hits_and_fallback(live):
    s, token = live
    res = s.handle_command(token, "annotate_spec", {"polyline_px": [[320, 300], [330, 300], [320, 2]]})
    assert res.ok
    ann = s.overlays.annotations[0]
    pose = s.rigs[s.active_rig].pose
    # first point: re-derive via raycast
    ray = unproject(320, 300, pose, INTR)
    hit = s.index.raycast(ray)
    assert hit is not None
    assert (ann.points[0] - hit.point).norm() < 1e-12
    # last point aimed at open sky: anchored at the fallback depth
    ray_miss = unproject(320, 2, pose, INTR)
    assert s.index.raycast(ray_miss) is None
    assert (ann.points[2] - ray_miss.at(5.0)).norm() < 1e-12


def test_annotate_audiences(live):
    s, token = live
    s.handle_command(token, "annotate_vr", {"polyline_px": [[100, 200], [140, 210]]})
    s.handle_command(token, "annotate_spec", {"polyline_px": [[100, 200], [140, 210]]})
    auds = [a.audience.value for a in s.overlays.annotations]
    assert auds == ["vr_only", "spectator_only"]


def test_annotate_polyline_validation(live):
    s, token = live
    res = s.handle_command(token, "annotate_vr", {"polyline_px": [[1, 1]]})
    assert not res.ok and "polyline_px" in res.error
    res = s.handle_command(token, "annotate_vr", {"polyline_px": [[1, 1], [99999, 0]]})
    assert not res.ok and "polyline_px" in res.error


def test_remove_commands_clear_collections(live):
    s, token = live
    s.handle_command(token, "annotate_vr", {"polyline_px": [[10, 10], [20, 20]]})
    s.handle_command(token, "place_target", {"x": 320, "y": 340})
    s.handle_command(token, "annotate_windowed", {"strokes_px": [[[1, 1], [5, 5]]]})
    assert s.overlays.annotations and s.overlays.windowed
    s.handle_command(token, "remove_all_annotations", {})
    assert s.overlays.annotations == []
    s.handle_command(token, "remove_targets", {})
    assert s.overlays.targets == []
    s.handle_command(token, "remove_windowed", {})
    assert s.overlays.windowed == []
    # tablet history survives the clears
    assert any(i.kind == "windowed" for i in s.tablet_history)


def test_switch_camera_and_set_arm(live):
    s, token = live
    res = s.handle_command(token, "switch_camera", {"mode": "map_view"})
    assert res.ok and s.active_rig is RigMode.MAP_VIEW
    res = s.handle_command(token, "set_arm", {"value": 100.0})
    assert res.ok and res.data["arm_length"] == 20.0
    res = s.handle_command(token, "switch_camera", {"mode": "warp"})
    assert not res.ok and "mode" in res.error


def test_free_cam_input_moves_free_rig(live):
    s, token = live
    before = s.rigs[RigMode.FREE].pose.position
    res = s.handle_command(token, "free_cam_input", {"forward": 1.0, "dt": 0.5})
    assert res.ok
    after = s.rigs[RigMode.FREE].pose.position
    assert (after - before).norm() == pytest.approx(1.5, abs=1e-9)


# --------------------------------------------------------------- chat/relay

def test_spectator_chat_does_not_touch_tablet(live):
    s, _ = live
    msg_id = s.ingest_chat("spec-7", "where did we place the blood pressure cuff?")
    assert msg_id == 1
    assert len(s.chat) == 1
    assert s.tablet_history == []


def test_chat_ids_strictly_increasing(live):
    s, _ = live
    ids = [s.ingest_chat(f"spec-{i % 10}", f"message {i}") for i in range(100)]
    assert ids == sorted(ids)
    assert len(set(ids)) == 100


def test_vr_host_cannot_chat(live):
    s, _ = live
    with pytest.raises(AuthError):
        s.ingest_chat("vr-1", "hello from inside")


def test_chat_length_cap(live):
    s, _ = live
    with pytest.raises(ValidationError):
        s.ingest_chat("spec-1", "x" * 501)


def test_relay_marks_message_and_appends_history(live):
    s, token = live
    for i in range(7):
        s.ingest_chat("spec-1", f"m{i + 1}")
    res = s.handle_command(token, "relay_chat", {"msg_id": 7})
    assert res.ok
    assert s.chat[6].relayed is True
    assert len(s.tablet_history) == 1
    assert s.tablet_history[0].text == "m7"
    # relayed at most once
    res = s.handle_command(token, "relay_chat", {"msg_id": 7})
    assert not res.ok and "already relayed" in res.error


def test_relay_purity_random_sequences(live, rng):
    s, token = live
    r = random.Random(7)
    relayed_order = []
    private_order = []
    for i in range(200):
        action = r.random()
        if action < 0.5:
            s.ingest_chat(f"spec-{r.randint(0, 5)}", f"chat {i}")
        elif action < 0.8 and s.chat:
            candidates = [m for m in s.chat if not m.relayed]
            if candidates:
                m = r.choice(candidates)
                assert s.handle_command(token, "relay_chat", {"msg_id": m.msg_id}).ok
                relayed_order.append(m.text)
        else:
            s.handle_command(token, "send_private_text", {"text": f"private {i}"})
            private_order.append(f"private {i}")
    history = s.tablet_view().history
    got_relayed = [i.text for i in history if i.source == "relay"]
    got_private = [i.text for i in history if i.source == "co_host" and i.kind == "text"]
    assert got_relayed == relayed_order
    assert got_private == private_order
    # exactly the relayed subsequence of the ledger, in relay order
    ledger_relayed = {m.text for m in s.chat if m.relayed}
    assert set(got_relayed) == ledger_relayed


# -------------------------------------------------------------------- audio

@pytest.mark.parametrize("source,on_air,expect", [
    (Role.VR_HOST, True, [Role.CO_HOST, Role.SPECTATOR]),
    (Role.VR_HOST, False, [Role.CO_HOST]),
    (Role.CO_HOST, True, [Role.VR_HOST]),
    (Role.CO_HOST, False, [Role.VR_HOST]),
])
def test_audio_routing_table(source, on_air, expect):
    assert route_audio(source, on_air) == expect


def test_session_routes_packet_with_current_on_air(live):
    s, token = live
    pkt = AudioPacket(Role.VR_HOST, b"pcm", 0)
    assert [d for d, _ in s.route_packet(pkt)] == [Role.CO_HOST]
    s.handle_command(token, "set_on_air", {"value": True})
    assert [d for d, _ in s.route_packet(pkt)] == [Role.CO_HOST, Role.SPECTATOR]


# ------------------------------------------------------------------- tablet

def test_tablet_snapshot_follows_switch(live):
    s, token = live
    s.handle_command(token, "switch_camera", {"mode": "map_view"})
    s.refresh_tablet_snapshot(Frame(64, 36, np.zeros((36, 64, 3), dtype=np.uint8), "map_view", 500))
    view = s.tablet_view()
    assert view.snapshot.camera_label == "map_view"


def test_on_air_reflected_in_tablet(live):
    s, token = live
    assert s.tablet_view().on_air is False
    s.handle_command(token, "set_on_air", {"value": True})
    assert s.tablet_view().on_air is True


def test_windowed_annotation_lands_in_history(live):
    s, token = live
    res = s.handle_command(token, "annotate_windowed", {"strokes_px": [[[0, 0], [10, 10]]]})
    assert res.ok
    assert s.tablet_history[-1].kind == "windowed"
    assert s.tablet_history[-1].image_sha == res.data["image_sha"]


# ------------------------------------------------------------------- digest

def test_digest_changes_with_state_and_reproduces(live):
    s, token = live
    d0 = s.state_digest()
    assert d0 == s.state_digest()
    s.handle_command(token, "set_on_air", {"value": True})
    assert s.state_digest() != d0
