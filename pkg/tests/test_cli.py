import json
import signal
import subprocess
import sys
import time
import urllib.request

from click.testing import CliRunner

from funnel.cli import main

PORT = 8957


def _run(args):
    return CliRunner().invoke(main, args)


def test_loadsim_zero_spectators_usage_error():
    res = _run(["loadsim", "-n", "0", "-t", "5"])
    assert res.exit_code == 2
    assert "-n" in res.output


def test_serve_missing_scene_exit_2(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text('scene_path = "/nope/missing.scene.json"\n')
    res = _run(["serve", "--config", str(cfg)])
    assert res.exit_code == 2
    assert "/nope/missing.scene.json" in res.output


def test_serve_unknown_config_key_exit_2(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("warp = 1\n")
    res = _run(["serve", "--config", str(cfg)])
    assert res.exit_code == 2


def test_init_config_round_trips(tmp_path):
    path = tmp_path / "demo.toml"
    res = _run(["init-config", str(path)])
    assert res.exit_code == 0
    from funnel.config import Config, load_config

    assert load_config(path, env={}) == Config()


def test_replay_missing_file_exit_2():
    res = _run(["replay", "/nope/missing.log"])
    assert res.exit_code == 2


def test_serve_sigint_exits_clean_and_persists(tmp_path):
    cfg = tmp_path / "srv.toml"
    chat_log = tmp_path / "chat.jsonl"
    cmd_log = tmp_path / "cmds.jsonl"
    cfg.write_text(
        f'listen_address = "127.0.0.1:{PORT}"\n'
        "segment_ms = 500\nwindow = 4\nlive_edge_offset = 1\n"
        f'chat_persist_path = "{chat_log}"\n'
        f'command_log_path = "{cmd_log}"\n'
    )
    proc = subprocess.Popen(
        [sys.executable, "-m", "funnel.cli", "serve", "--config", str(cfg)],
        stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True,
    )
    base = f"http://127.0.0.1:{PORT}"
    try:
        deadline = time.time() + 20
        up = False
        while time.time() < deadline:
            try:
                urllib.request.urlopen(f"{base}/api/state", timeout=1)
                up = True
                break
            except Exception:
                time.sleep(0.2)
        assert up, "server did not come up"
        # liveness: first playlist entry within 2 segment durations of warm-up
        deadline = time.time() + 5
        got = None
        while time.time() < deadline:
            pl = json.load(urllib.request.urlopen(f"{base}/live/full/playlist.json", timeout=1))
            if pl["segments"]:
                got = pl
                break
            time.sleep(0.1)
        assert got is not None
        req = urllib.request.Request(
            f"{base}/api/chat",
            data=json.dumps({"client_id": "spec-1", "text": "persist me"}).encode(),
            headers={"Content-Type": "application/json"},
        )
        assert json.load(urllib.request.urlopen(req))["ok"]
    finally:
        proc.send_signal(signal.SIGINT)
        rc = proc.wait(timeout=15)
    assert rc == 0
    assert chat_log.is_file()
    entries = [json.loads(l) for l in chat_log.read_text().splitlines()]
    assert entries and entries[0]["text"] == "persist me"
    assert cmd_log.is_file()
    first = json.loads(cmd_log.read_text().splitlines()[0])
    assert first["kind"] == "meta"


def test_port_busy_exits_nonzero(tmp_path):
    cfg = tmp_path / "srv.toml"
    cfg.write_text(f'listen_address = "127.0.0.1:{PORT + 1}"\nsegment_ms = 500\nwindow = 4\nlive_edge_offset = 1\n')
    a = subprocess.Popen(
        [sys.executable, "-m", "funnel.cli", "serve", "--config", str(cfg)],
        stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL,
    )
    try:
        deadline = time.time() + 20
        while time.time() < deadline:
            try:
                urllib.request.urlopen(f"http://127.0.0.1:{PORT + 1}/api/state", timeout=1)
                break
            except Exception:
                time.sleep(0.2)
        b = subprocess.run(
            [sys.executable, "-m", "funnel.cli", "serve", "--config", str(cfg)],
            capture_output=True, text=True, timeout=30,
        )
        assert b.returncode != 0
    finally:
        a.terminate()
        a.wait(timeout=10)
