"""Command-line entry points: serve, loadsim, replay, init-config.

Exit codes: 0 ok, 1 runtime failure, 2 usage/config error.
"""

from __future__ import annotations

import asyncio
import json
import sys
from pathlib import Path

import click
import uvicorn

from .config import Config, ConfigError, dump_config, load_config


@click.group()
def main() -> None:
    """Mediated VR live-streaming server and tooling."""


def _load(config_path: str | None, overrides: dict) -> Config:
    try:
        cfg = load_config(config_path)
    except ConfigError as e:
        raise click.UsageError(str(e))
    except FileNotFoundError as e:
        raise click.UsageError(f"config file not found: {e.filename}")
    if overrides:
        fields = {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}
        fields.update(overrides)
        try:
            cfg = Config(**fields)
        except ConfigError as e:
            raise click.UsageError(str(e))
    return cfg


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None, help="TOML config file.")
@click.option("--listen", default=None, help="host:port override.")
@click.option("--metrics", "metrics_path", type=click.Path(), default=None,
              help="JSON-lines metrics output.")
@click.option("--command-log", "command_log_path", type=click.Path(), default=None,
              help="Write the session event log here on shutdown.")
@click.option("--chat-log", "chat_persist_path", type=click.Path(), default=None,
              help="Persist the chat ledger here on shutdown.")
def serve(config_path, listen, metrics_path, command_log_path, chat_persist_path) -> None:
    """Run the full server against the configured scene and scenario."""
    overrides = {}
    if listen:
        overrides["listen_address"] = listen
    if metrics_path:
        overrides["metrics_path"] = metrics_path
    if command_log_path:
        overrides["command_log_path"] = command_log_path
    if chat_persist_path:
        overrides["chat_persist_path"] = chat_persist_path
    cfg = _load(config_path, overrides)

    scene_path = cfg.resolve_scene_path()
    if not scene_path.is_file():
        click.echo(f"error: scene file not found: {scene_path}", err=True)
        sys.exit(2)
    scenario_path = cfg.resolve_scenario_path()
    if not scenario_path.is_file():
        click.echo(f"error: scenario file not found: {scenario_path}", err=True)
        sys.exit(2)

    from .scene import SceneFormatError
    from .service.app import create_app
    from .service.runtime import Engine

    try:
        engine = Engine(cfg)
    except SceneFormatError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(2)

    metrics_file = None
    if cfg.metrics_path:
        metrics_file = open(cfg.metrics_path, "a", buffering=1)
        engine.metrics = lambda doc: metrics_file.write(json.dumps(doc) + "\n")

    app = create_app(cfg, engine)
    click.echo(f"funnel serving on http://{cfg.host}:{cfg.port}  "
               f"(scene={cfg.scene_path}, scenario={cfg.scenario_path})")
    click.echo(f"vr-host token: {engine.vr_token}")
    try:
        uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="warning")
    except (OSError, SystemExit) as e:
        code = e.code if isinstance(e, SystemExit) else 1
        if isinstance(e, OSError):
            click.echo(f"error: cannot bind {cfg.listen_address}: {e}", err=True)
            sys.exit(1)
        sys.exit(code or 0)
    finally:
        if metrics_file:
            metrics_file.close()


@main.command()
@click.option("-n", "spectators", type=int, required=True, help="Concurrent spectator count.")
@click.option("-t", "--duration", "duration_s", type=float, default=60.0, show_default=True,
              help="Run length in seconds.")
@click.option("--url", default="http://127.0.0.1:8777", show_default=True, help="Server base URL.")
@click.option("--rung", default="half", show_default=True, help="Ladder rung to play.")
@click.option("--offset", type=int, default=None,
              help="Live-edge offset in segments (default: server's).")
@click.option("-o", "--out", "out_path", type=click.Path(), default=None,
              help="Write the JSON report here (default: stdout).")
def loadsim(spectators, duration_s, url, rung, offset, out_path) -> None:
    """Simulate many spectators against a running server."""
    if spectators <= 0:
        raise click.UsageError("-n must be a positive spectator count")
    if duration_s <= 0:
        raise click.UsageError("-t must be a positive duration")

    from .loadsim import HarnessError, run_loadsim

    try:
        report = asyncio.run(run_loadsim(url, spectators, duration_s, rung=rung, offset=offset))
    except HarnessError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    doc = report.to_dict()
    text = json.dumps(doc, indent=1)
    if out_path:
        Path(out_path).write_text(text)
        click.echo(f"report written to {out_path}")
    else:
        click.echo(text)
    click.echo(
        f"n={report.n} stalls={report.stalls_total} "
        f"latency median={report.latency_median_s}s "
        f"range=[{report.latency_min_s}, {report.latency_max_s}]s "
        f"hash_sets_identical={report.hash_sets_identical}",
        err=True,
    )
    if report.stalls_total or not report.hash_sets_identical:
        sys.exit(1)


@main.command()
@click.argument("logfile", type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Base config; the log's meta header overrides fingerprint fields.")
def replay(logfile, config_path) -> None:
    """Replay a recorded session event log and print the state digest."""
    base = _load(config_path, {}) if config_path else None

    from .replay import ReplayDivergence, replay_file

    try:
        result = replay_file(logfile, base)
    except ReplayDivergence as e:
        click.echo(f"divergence: {e}", err=True)
        sys.exit(1)
    out = {
        "digest": result.digest,
        "entries_applied": result.entries_applied,
        "halted_at": result.halted_at,
        "final_tick": result.final_tick,
    }
    click.echo(json.dumps(out))
    if result.halted_at is not None:
        sys.exit(1)


@main.command("init-config")
@click.argument("path", type=click.Path(), default="demo.toml")
def init_config(path) -> None:
    """Write a default config file to PATH."""
    Path(path).write_text(dump_config(Config()))
    click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()
