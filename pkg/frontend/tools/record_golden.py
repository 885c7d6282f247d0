#!/usr/bin/env python3
"""Record golden request fixtures for the eight toolbar tools.

Boots the real server, joins as co-host, sends each tool's request body
(byte-built exactly the way the console encodes it), asserts the server
accepts it, and freezes the body with a placeholder token into
frontend/fixtures/golden/. The TypeScript test re-encodes the same
gestures and compares byte-for-byte.
"""

import json
import signal
import subprocess
import sys
import time
import urllib.request
from pathlib import Path

import httpx
import websockets.sync.client as ws_sync

PORT = 8972
PLACEHOLDER = "GOLDEN-TOKEN"
OUT = Path(__file__).resolve().parents[1] / "fixtures" / "golden"


def tool_params(tool: str, points: list[list[int]]) -> dict:
    if tool in ("select_object", "place_target"):
        x, y = points[-1]
        return {"x": x, "y": y}
    if tool in ("annotate_vr", "annotate_spec"):
        return {"polyline_px": points}
    if tool == "annotate_windowed":
        return {"strokes_px": [points], "stroke_px": 3}
    return {}


def body_text(token: str, tool: str, points: list[list[int]]) -> str:
    # key order mirrors the console encoder: token, cmd, params
    return json.dumps(
        {"token": token, "cmd": tool, "params": tool_params(tool, points)},
        separators=(",", ":"),
    )


def main() -> int:
    cfg = Path("/tmp/golden-server.toml")
    cfg.write_text(
        f'listen_address = "127.0.0.1:{PORT}"\ntoken_seed = "golden"\n'
        "segment_ms = 1000\nwindow = 6\nlive_edge_offset = 2\n"
    )
    proc = subprocess.Popen(
        [sys.executable, "-m", "funnel.cli", "serve", "--config", str(cfg)],
        stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL,
    )
    base = f"http://127.0.0.1:{PORT}"
    try:
        deadline = time.time() + 25
        while time.time() < deadline:
            try:
                stats = json.load(urllib.request.urlopen(f"{base}/live/stats", timeout=1))
                if stats.get("newest_seq"):
                    break
            except Exception:
                time.sleep(0.2)
        ws = ws_sync.connect(f"ws://127.0.0.1:{PORT}/signal")
        ws.send(json.dumps({"type": "join", "role": "co_host", "client_id": "golden-co"}))
        token = json.loads(ws.recv())["session_token"]

        # pick pixels that really hit: project scene anchors through the
        # default free camera the server starts with
        from funnel.config import Config
        from funnel.geom import CameraIntrinsics, Pose, Vec3, look_rotation, project
        from funnel.service.runtime import FREE_CAM_START_LOOK, FREE_CAM_START_POS

        cfg_obj = Config()
        intr = CameraIntrinsics(
            vertical_fov=cfg_obj.render_fov_rad,
            width_px=cfg_obj.render_width,
            height_px=cfg_obj.render_height,
        )
        cam = Pose(FREE_CAM_START_POS, look_rotation(FREE_CAM_START_LOOK - FREE_CAM_START_POS))

        def px(world: Vec3) -> list[int]:
            pr = project(world, cam, intr)
            assert pr is not None, f"{world} not in view"
            return [round(pr[0]), round(pr[1])]

        cauldron = px(Vec3(-1.8, 0.3, -1.6))
        table = px(Vec3(0.0, 0.9, -1.2))
        wand = px(Vec3(0.3, 0.93, -1.25))
        gestures = {
            "select_object": [cauldron],
            "annotate_vr": [table, [table[0] + 30, table[1] - 6], [table[0] + 55, table[1] + 4]],
            "annotate_spec": [wand, [wand[0] + 24, wand[1] + 8], [wand[0] + 48, wand[1] - 4]],
            "annotate_windowed": [[50, 60], [90, 100], [130, 96]],
            "place_target": [table],
            "remove_windowed": [],
            "remove_all_annotations": [],
            "remove_targets": [],
        }

        OUT.mkdir(parents=True, exist_ok=True)
        with httpx.Client(timeout=5.0) as client:
            for tool, points in gestures.items():
                live = body_text(token, tool, points)
                r = client.post(
                    f"{base}/api/command", content=live,
                    headers={"Content-Type": "application/json"},
                )
                res = r.json()
                assert res.get("ok"), f"{tool} not accepted: {res}"
                assert not (res.get("result") or {}).get("rejected"), f"{tool} rejected: {res}"
                fixture = {
                    "tool": tool,
                    "gesture_points": points,
                    "body": body_text(PLACEHOLDER, tool, points),
                    "accepted_result": res["result"],
                }
                path = OUT / f"{tool}.json"
                path.write_text(json.dumps(fixture, indent=1) + "\n")
                print(f"recorded {path.name}: {fixture['body'][:72]}…")
        ws.close()
        return 0
    finally:
        proc.send_signal(signal.SIGINT)
        proc.wait(timeout=15)


if __name__ == "__main__":
    sys.exit(main())
