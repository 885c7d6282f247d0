"""Deterministic replay of a recorded session event log.

The log is JSON lines: a meta header (config fingerprint) followed by
join/chat/command entries, each tagged with the tick it was applied after.
Replay rebuilds an engine from the same config, steps it to each entry's
tick and re-applies the entry. The final state digest must match across
replays; an invalid-token command halts the replay at its index, mirroring
the live outcome.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .config import Config
from .service.runtime import Engine

META_FIELDS = (
    "scene_path", "scenario_path", "tick_hz", "render_width", "render_height",
    "render_fov_deg", "arm_min", "arm_max", "smoothing_tau", "token_seed",
    "segment_ms", "window", "live_edge_offset", "loop_scenario", "rungs",
)


class ReplayDivergence(RuntimeError):
    """Replay produced a different outcome than the recorded run."""


@dataclass(slots=True)
class ReplayResult:
    digest: str
    entries_applied: int
    halted_at: int | None  # entry index of the auth failure that stopped replay
    final_tick: int


def meta_line(config: Config) -> str:
    return json.dumps({"kind": "meta", **{f: getattr(config, f) for f in META_FIELDS}}, sort_keys=True)


def parse_log(text: str) -> tuple[dict | None, list[dict]]:
    meta = None
    entries = []
    for i, line in enumerate(text.splitlines()):
        line = line.strip()
        if not line:
            continue
        doc = json.loads(line)
        if doc.get("kind") == "meta":
            meta = doc
        else:
            entries.append(doc)
    return meta, entries


def config_from_meta(meta: dict | None, base: Config | None = None) -> Config:
    cfg = base or Config()
    if not meta:
        return cfg
    overrides = {k: v for k, v in meta.items() if k in META_FIELDS}
    fields = {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}
    fields.update(overrides)
    return Config(**fields)


def replay_entries(config: Config, entries: list[dict]) -> ReplayResult:
    engine = Engine(config)
    applied = 0
    halted_at = None
    for i, entry in enumerate(entries):
        target_tick = int(entry.get("after_tick", 0))
        while engine.tick < target_tick:
            engine.step()
        kind = entry.get("kind")
        if kind == "end":
            continue
        if kind == "join":
            engine.apply_join(entry["client_id"], {"type": "join", "role": entry.get("role")})
        elif kind == "chat":
            engine.apply_chat(entry["client_id"], entry["text"])
        elif kind == "command":
            res = engine.apply_command(entry["token"], entry["cmd"], entry.get("params") or {})
            recorded = entry.get("outcome", {})
            if recorded and bool(recorded.get("ok")) != res.ok:
                raise ReplayDivergence(
                    f"entry {i}: recorded ok={recorded.get('ok')} but replay gave ok={res.ok} "
                    f"({res.error})"
                )
            if not res.ok and res.error and res.error.startswith("auth"):
                halted_at = i
                applied += 1
                break
        else:
            raise ReplayDivergence(f"entry {i}: unknown kind {kind!r}")
        applied += 1
    return ReplayResult(
        digest=engine.session.state_digest(),
        entries_applied=applied,
        halted_at=halted_at,
        final_tick=engine.tick,
    )


def replay_file(path: str | Path, base_config: Config | None = None) -> ReplayResult:
    meta, entries = parse_log(Path(path).read_text())
    return replay_entries(config_from_meta(meta, base_config), entries)
