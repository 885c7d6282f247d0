import json

import pytest

from funnel.config import Config
from funnel.replay import (
    ReplayDivergence,
    config_from_meta,
    parse_log,
    replay_entries,
    replay_file,
)
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
        token_seed="replay-test",
    )
    base.update(kw)
    return Config(**base)


def _record_demo_session(cfg) -> tuple[str, str]:
    """Drive a live-style session: ticks interleaved with commands/chat."""
    engine = Engine(cfg)
    out = engine.apply_join("co-1", {"type": "join", "role": "co_host"})
    token = out[0][1]["session_token"]
    for _ in range(10):
        engine.step()
    engine.apply_chat("spec-1", "what is in the cauldron?")
    engine.apply_command(token, "switch_camera", {"mode": "third_follow"})
    for _ in range(15):
        engine.step()
    engine.apply_command(token, "place_target", {"x": 64, "y": 60})
    engine.apply_command(token, "annotate_spec", {"polyline_px": [[30, 40], [60, 44], [90, 40]]})
    engine.apply_command(token, "relay_chat", {"msg_id": 1})
    for _ in range(8):
        engine.step()
    engine.apply_command(token, "annotate_windowed", {"strokes_px": [[[5, 5], [40, 30]]]})
    engine.apply_command(token, "set_on_air", {"value": True})
    for _ in range(5):
        engine.step()
    return engine.dump_event_log(), engine.session.state_digest()


def test_replay_reproduces_live_digest(tmp_path):
    cfg = _config()
    log_text, live_digest = _record_demo_session(cfg)
    p = tmp_path / "session.log"
    p.write_text(log_text)
    result = replay_file(p)
    assert result.digest == live_digest
    assert result.halted_at is None


def test_replay_twice_identical(tmp_path):
    cfg = _config()
    log_text, _ = _record_demo_session(cfg)
    p = tmp_path / "session.log"
    p.write_text(log_text)
    a = replay_file(p)
    b = replay_file(p)
    assert a.digest == b.digest
    assert a.entries_applied == b.entries_applied


def test_empty_log_digest_of_initial_state():
    cfg = _config()
    result = replay_entries(cfg, [])
    fresh = Engine(cfg)
    assert result.digest == fresh.session.state_digest()
    assert result.entries_applied == 0


def test_invalid_token_halts_at_same_index(tmp_path):
    cfg = _config()
    engine = Engine(cfg)
    out = engine.apply_join("co-1", {"type": "join", "role": "co_host"})
    token = out[0][1]["session_token"]
    engine.step()
    engine.apply_command(token, "set_on_air", {"value": True})
    res = engine.apply_command("forged-token", "set_on_air", {"value": False})
    assert not res.ok
    live_error_index = len(engine.event_log) - 1  # join=0, cmd=1, bad cmd=2
    engine.apply_command(token, "switch_camera", {"mode": "map_view"})  # after the halt point
    p = tmp_path / "bad.log"
    p.write_text(engine.dump_event_log())
    result = replay_file(p)
    assert result.halted_at == live_error_index
    # entries after the halt were not applied
    assert result.entries_applied == live_error_index + 1


def test_replay_divergence_detected(tmp_path):
    cfg = _config()
    log_text, _ = _record_demo_session(cfg)
    # tamper: claim a command failed that actually succeeds
    lines = log_text.splitlines()
    for i, line in enumerate(lines):
        doc = json.loads(line)
        if doc.get("kind") == "command" and doc["outcome"].get("ok"):
            doc["outcome"]["ok"] = False
            lines[i] = json.dumps(doc)
            break
    p = tmp_path / "tampered.log"
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(ReplayDivergence):
        replay_file(p)


def test_meta_header_carries_config():
    cfg = _config(token_seed="meta-seed", tick_hz=24)
    engine = Engine(cfg)
    meta, entries = parse_log(engine.dump_event_log())
    assert meta["token_seed"] == "meta-seed"
    rebuilt = config_from_meta(meta)
    assert rebuilt.token_seed == "meta-seed"
    assert rebuilt.tick_hz == 24


def test_windowed_annotation_replay_bit_exact(tmp_path):
    # the windowed composite hash is part of the digest: replay must
    # re-render the same snapshot at the same tick
    cfg = _config()
    log_text, live_digest = _record_demo_session(cfg)
    p = tmp_path / "w.log"
    p.write_text(log_text)
    assert replay_file(p).digest == live_digest
