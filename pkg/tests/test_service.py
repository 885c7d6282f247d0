"""Endpoint-level tests against the FastAPI app with a manually stepped
engine (the background tick loop stays off; tests drive engine.step())."""

import json

import pytest
from fastapi.testclient import TestClient

from funnel.config import Config
from funnel.service.app import create_app
from funnel.service.runtime import Engine
from funnel.wire import decode_record, iter_records


def _config(**kw):
    base = dict(
        tick_hz=30,
        render_width=128,
        render_height=72,
        rungs=[
            {"name": "full", "width": 128, "height": 72},
            {"name": "half", "width": 64, "height": 36},
        ],
        segment_ms=500,
        window=4,
        live_edge_offset=2,
        token_seed="svc-test",
    )
    base.update(kw)
    return Config(**base)


@pytest.fixture
def engine():
    return Engine(_config())


@pytest.fixture
def client(engine):
    app = create_app(engine.config, engine)
    # no lifespan: the tick loop stays off; tests step the engine directly
    return TestClient(app)


def _join_cohost(engine, cid="co-1"):
    # join directly on the engine: a websocket join would free the slot the
    # moment its context closes (disconnect => bye)
    out = engine.apply_join(cid, {"type": "join", "role": "co_host"})
    assert out[0][1]["type"] == "role_assigned"
    return out[0][1]["session_token"]


def test_signal_join_and_command_flow(client, engine):
    with client.websocket_connect("/signal") as ws:
        ws.send_text(json.dumps({"type": "join", "role": "co_host", "client_id": "co-1"}))
        msg = json.loads(ws.receive_text())
        assert msg["type"] == "role_assigned"
        token = msg["session_token"]
        r = client.post("/api/command", json={"token": token, "cmd": "set_on_air", "params": {"value": True}})
        assert r.status_code == 200
        assert r.json()["ok"] is True
        assert engine.session.on_air is True
    # socket closed => bye => slot freed, token dead
    r = client.post("/api/command", json={"token": token, "cmd": "set_on_air", "params": {"value": False}})
    assert r.json()["ok"] is False


def test_signal_rejects_second_cohost(client):
    with client.websocket_connect("/signal") as ws1:
        ws1.send_text(json.dumps({"type": "join", "role": "co_host", "client_id": "co-1"}))
        assert json.loads(ws1.receive_text())["type"] == "role_assigned"
        with client.websocket_connect("/signal") as ws2:
            ws2.send_text(json.dumps({"type": "join", "role": "co_host", "client_id": "co-2"}))
            msg = json.loads(ws2.receive_text())
            assert msg == {"type": "rejected", "reason": "role_taken"}


def test_offer_relayed_to_sim_host_and_answered(client):
    with client.websocket_connect("/signal") as ws:
        ws.send_text(json.dumps({"type": "join", "role": "co_host", "client_id": "co-9"}))
        assert json.loads(ws.receive_text())["type"] == "role_assigned"
        ws.send_text(json.dumps({"type": "offer", "blob": "fake-sdp-offer"}))
        answer = json.loads(ws.receive_text())
        assert answer["type"] == "answer"
        assert answer["blob"].startswith("sim-answer:")


def test_command_requires_valid_token(client):
    r = client.post("/api/command", json={"token": "nope", "cmd": "set_on_air", "params": {"value": True}})
    assert r.json()["ok"] is False
    assert "auth" in r.json()["error"]


def test_relay_websocket_carries_commands(client, engine):
    token = _join_cohost(engine)
    with client.websocket_connect("/relay") as ws:
        ws.send_text(json.dumps({"id": 7, "token": token, "cmd": "switch_camera", "params": {"mode": "map_view"}}))
        res = json.loads(ws.receive_text())
        assert res["ok"] is True and res["id"] == 7 and res["result"]["active"] == "map_view"


def test_chat_post_ledger_and_broadcast(client, engine):
    with client.websocket_connect("/chat") as chat_ws:
        backlog = json.loads(chat_ws.receive_text())
        assert backlog == {"event": "backlog", "messages": []}
        r = client.post("/api/chat", json={"client_id": "spec-1", "text": "hello stream"})
        assert r.json()["ok"] and r.json()["msg_id"] == 1
        event = json.loads(chat_ws.receive_text())
        assert event["event"] == "message" and event["text"] == "hello stream"
    ledger = client.get("/api/chat").json()["messages"]
    assert len(ledger) == 1 and ledger[0]["relayed"] is False


def test_chat_relay_marks_and_notifies(client, engine):
    token = _join_cohost(engine)
    client.post("/api/chat", json={"client_id": "spec-1", "text": "relay me"})
    with client.websocket_connect("/chat") as chat_ws:
        chat_ws.receive_text()  # backlog
        r = client.post("/api/command", json={"token": token, "cmd": "relay_chat", "params": {"msg_id": 1}})
        assert r.json()["ok"]
        event = json.loads(chat_ws.receive_text())
        assert event == {"event": "relayed", "msg_id": 1}
    assert client.get("/api/chat").json()["messages"][0]["relayed"] is True


def test_chat_too_long_rejected(client):
    r = client.post("/api/chat", json={"client_id": "spec-1", "text": "x" * 501})
    assert r.json()["ok"] is False and "validation" in r.json()["error"]


def test_tablet_requires_vr_token(client, engine):
    r = client.get("/api/tablet", params={"token": "wrong"})
    assert r.status_code == 403
    r = client.get("/api/tablet", params={"token": engine.vr_token})
    assert r.status_code == 200
    body = r.json()
    assert body["on_air"] is False and body["history"] == []


def test_private_text_reaches_tablet(client, engine):
    token = _join_cohost(engine)
    client.post("/api/command", json={"token": token, "cmd": "send_private_text", "params": {"text": "check the cauldron"}})
    body = client.get("/api/tablet", params={"token": engine.vr_token}).json()
    assert [i["text"] for i in body["history"]] == ["check the cauldron"]


def test_audio_endpoint_routes_privately(client, engine):
    token = _join_cohost(engine)
    r = client.post("/api/audio", json={"token": token, "payload_b64": "cGNtMTY="})
    assert r.json() == {"ok": True, "delivered_to": ["vr_host"], "error": None}
    assert engine.audio_counters["vr_host"] == 1
    r = client.post("/api/audio", json={"token": "bad", "payload_b64": ""})
    assert r.json()["ok"] is False


def test_state_endpoint_public(client):
    body = client.get("/api/state").json()
    assert body["tick"] == 0
    assert body["active_rig"] == "free"


def test_playlist_and_segment_flow(client, engine):
    # render+ingest enough ticks for two segments (500 ms each at 30 Hz)
    for _ in range(35):
        engine.step()
        engine.ingest_broadcast(engine.render_broadcast_now())
    pl = json.loads(client.get("/live/full/playlist.json").text)
    assert pl["version"] == 1
    assert pl["segments"], "no segments cut"
    seq = pl["segments"][0]["seq"]
    seg = client.get(f"/live/full/seg/{seq}")
    assert seg.status_code == 200
    records = list(iter_records(seg.content))
    assert records and records[0].width == 128
    # same bytes on a second fetch
    again = client.get(f"/live/full/seg/{seq}")
    assert again.content == seg.content


def test_segment_gone_is_410(client, engine):
    for _ in range(100):
        engine.step()
        engine.ingest_broadcast(engine.render_broadcast_now())
    pl = json.loads(client.get("/live/half/playlist.json").text)
    oldest = pl["media_sequence"]
    assert oldest > 1
    r = client.get("/live/half/seg/1")
    assert r.status_code == 410


def test_future_segment_is_404_not_410(client, engine):
    for _ in range(20):
        engine.step()
        engine.ingest_broadcast(engine.render_broadcast_now())
    newest = engine.store.newest_seq
    assert newest is not None
    assert client.get(f"/live/full/seg/{newest + 1}").status_code == 404


def test_unknown_rung_404(client):
    assert client.get("/live/4k/playlist.json").status_code == 404
    assert client.get("/live/4k/seg/1").status_code == 404


def test_live_stats_shape(client):
    body = client.get("/live/stats").json()
    assert body["segment_ms"] == 500
    assert body["default_offset"] == 2
    assert body["rungs"] == ["full", "half"]


def test_media_socket_requires_cohost_token(client):
    from starlette.websockets import WebSocketDisconnect as Closed

    with pytest.raises(Closed):
        with client.websocket_connect("/media?token=bogus") as ws:
            ws.receive_bytes()


def test_media_socket_streams_records(client, engine):
    token = _join_cohost(engine)
    with client.websocket_connect(f"/media?token={token}") as ws:
        engine.step()
        frame = engine.render_broadcast_now()
        from funnel.wire import encode_frame

        record = encode_frame(frame, 0)
        engine.on_media_record(record)
        data = ws.receive_bytes()
        rec, _ = decode_record(data)
        assert (rec.width, rec.height) == (128, 72)
        assert rec.pts_ms == engine.pts_ms


def test_pages_served(client):
    assert "funnel" in client.get("/").text or "<html" in client.get("/").text.lower()
    assert client.get("/spectator").status_code == 200
