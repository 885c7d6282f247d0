"""Server configuration: TOML file, `SFNL_*` environment overrides.

Unknown keys are rejected so typos fail loudly. `builtin:` paths resolve to
the packaged demo data (scenes and scenarios under funnel/data).
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

import toml

from .fanout import LadderRung

ENV_PREFIX = "SFNL_"


class ConfigError(ValueError):
    pass


@dataclass(slots=True)
class Config:
    scene_path: str = "builtin:escape_room.scene.json"
    scenario_path: str = "builtin:task_a.scenario.jsonl"
    listen_address: str = "127.0.0.1:8777"
    tick_hz: int = 30
    render_width: int = 640
    render_height: int = 360
    render_fov_deg: float = 60.0
    thumbnail_fps: float = 1.0
    tablet_hz: float = 2.0
    segment_ms: int = 2000
    window: int = 10
    live_edge_offset: int = 10
    rungs: list[dict] = field(default_factory=lambda: [
        {"name": "full", "width": 640, "height": 360},
        {"name": "half", "width": 320, "height": 180},
    ])
    arm_min: float = 0.5
    arm_max: float = 20.0
    smoothing_tau: float = 0.25
    free_cam_speed: float = 3.0
    token_seed: str = "funnel-demo"
    loop_scenario: bool = False
    chat_persist_path: str = ""
    command_log_path: str = ""
    metrics_path: str = ""

    def __post_init__(self) -> None:
        positive = [
            "tick_hz", "render_width", "render_height", "render_fov_deg",
            "thumbnail_fps", "tablet_hz", "segment_ms", "window",
            "arm_max", "smoothing_tau", "free_cam_speed",
        ]
        for name in positive:
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or v <= 0:
                raise ConfigError(f"{name} must be positive, got {v!r}")
        for name in ("arm_min", "live_edge_offset"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or v < 0:
                raise ConfigError(f"{name} must be >= 0, got {v!r}")
        if self.arm_min >= self.arm_max:
            raise ConfigError("arm_min must be below arm_max")
        if not (0.0 < self.render_fov_deg < 180.0):
            raise ConfigError("render_fov_deg must be in (0, 180)")
        if self.live_edge_offset > self.window:
            raise ConfigError("live_edge_offset cannot exceed the playlist window")
        if not self.rungs:
            raise ConfigError("need at least one ladder rung")
        for r in self.rungs:
            extra = set(r) - {"name", "width", "height"}
            if extra:
                raise ConfigError(f"unknown rung keys: {sorted(extra)}")
        if ":" not in self.listen_address:
            raise ConfigError("listen_address must be host:port")

    @property
    def host(self) -> str:
        return self.listen_address.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.listen_address.rsplit(":", 1)[1])

    @property
    def render_fov_rad(self) -> float:
        import math

        return math.radians(self.render_fov_deg)

    def ladder(self) -> tuple[LadderRung, ...]:
        return tuple(LadderRung(r["name"], int(r["width"]), int(r["height"])) for r in self.rungs)

    def resolve_scene_path(self) -> Path:
        return _resolve(self.scene_path)

    def resolve_scenario_path(self) -> Path:
        return _resolve(self.scenario_path)


def _resolve(path: str) -> Path:
    if path.startswith("builtin:"):
        name = path[len("builtin:"):]
        return Path(str(resources.files("funnel").joinpath("data", name)))
    return Path(path)


_FIELD_TYPES = {f.name: f.type for f in fields(Config)}


def _coerce(name: str, raw: str):
    current = getattr(Config(), name)
    if isinstance(current, bool):
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, list):
        import json

        return json.loads(raw)
    return raw


def load_config(path: str | Path | None = None, env: dict | None = None) -> Config:
    """Config from TOML plus SFNL_* overrides (override wins)."""
    doc: dict = {}
    if path is not None:
        text = Path(path).read_text()
        try:
            doc = toml.loads(text)
        except toml.TomlDecodeError as e:
            raise ConfigError(f"{path}: {e}") from e
    unknown = set(doc) - set(_FIELD_TYPES)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    env = dict(os.environ if env is None else env)
    for key, raw in env.items():
        if not key.startswith(ENV_PREFIX):
            continue
        name = key[len(ENV_PREFIX):].lower()
        if name not in _FIELD_TYPES:
            raise ConfigError(f"unknown env override {key}")
        try:
            doc[name] = _coerce(name, raw)
        except (ValueError, TypeError) as e:
            raise ConfigError(f"bad env override {key}={raw!r}: {e}") from e
    try:
        return Config(**doc)
    except TypeError as e:
        raise ConfigError(str(e)) from e


def dump_config(cfg: Config) -> str:
    return toml.dumps(asdict(cfg))


def save_config(cfg: Config, path: str | Path) -> None:
    Path(path).write_text(dump_config(cfg))
