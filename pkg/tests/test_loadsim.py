"""Short end-to-end loadsim runs against a real server subprocess."""

import asyncio
import json
import subprocess
import sys
import time
import urllib.request

import pytest

from funnel.loadsim import HarnessError, run_loadsim

PORT = 8951


@pytest.fixture(scope="module")
def live_server(tmp_path_factory):
    cfg = tmp_path_factory.mktemp("ls") / "ls.toml"
    cfg.write_text(
        f'listen_address = "127.0.0.1:{PORT}"\n'
        "segment_ms = 500\nwindow = 8\nlive_edge_offset = 2\n"
        'token_seed = "loadsim-test"\n'
    )
    proc = subprocess.Popen(
        [sys.executable, "-m", "funnel.cli", "serve", "--config", str(cfg)],
        stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL,
    )
    deadline = time.time() + 20
    while time.time() < deadline:
        try:
            stats = json.load(urllib.request.urlopen(f"http://127.0.0.1:{PORT}/live/stats", timeout=1))
            if stats.get("newest_seq"):
                break
        except Exception:
            pass
        time.sleep(0.2)
    yield f"http://127.0.0.1:{PORT}"
    proc.terminate()
    proc.wait(timeout=10)


def test_small_loadsim_no_stalls_and_latency_law(live_server):
    report = asyncio.run(run_loadsim(live_server, n=3, duration_s=6.0, rung="half", offset=2))
    assert report.stalls_total == 0
    assert report.hash_sets_identical
    assert len(report.spectators) == 3
    # latency law: offset*dur <= latency <= (offset+1)*dur + poll (one-frame slack)
    for spec in report.spectators:
        assert spec.steady_latency_s >= 2 * 0.5 - 0.1
        assert spec.steady_latency_s <= 3 * 0.5 + 0.6
        assert spec.startup_latency_s > 0


def test_single_spectator_offset_one(live_server):
    report = asyncio.run(run_loadsim(live_server, n=1, duration_s=4.0, rung="full", offset=1))
    spec = report.spectators[0]
    # one segment behind: latency about one to two segment durations
    assert 0.4 <= spec.steady_latency_s <= 1.6


def test_unknown_rung_is_harness_error(live_server):
    with pytest.raises(HarnessError, match="rung"):
        asyncio.run(run_loadsim(live_server, n=1, duration_s=3.0, rung="4k"))


def test_unreachable_server_is_harness_error():
    with pytest.raises(HarnessError, match="unreachable"):
        asyncio.run(run_loadsim("http://127.0.0.1:59999", n=1, duration_s=2.0))


def test_zero_spectators_rejected():
    with pytest.raises(ValueError):
        asyncio.run(run_loadsim("http://127.0.0.1:1", n=0, duration_s=1.0))
