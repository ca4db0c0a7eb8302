"""Command-line surface: world/trajectory generation, evaluation, benchmarks,
the HTTP server, and deterministic step-log replay.

Option precedence is flags > config file > built-in defaults; the effective
configuration is echoed in every report.
"""
from __future__ import annotations

import math
import os
import sys
from pathlib import Path

import click

from . import jsonio
from .eval_harness import bench_retrieval, calibration_run, compare_strategies
from .gateway import SessionManager, create_app, replay_step_log
from .geometry import CameraPose, OverlapConfig
from .retrieval import RetrievalConfig, StrategyKind
from .trajectory import (
    RoamSpec,
    check_constraints,
    generate_roam,
    load_trajectory,
    loop_roam,
    rotate_and_return,
    save_trajectory,
)
from .world import generate_world, save_world

STRATEGY_CHOICES = [s.value for s in StrategyKind]


def _load_config_file(path: str) -> dict:
    p = Path(path)
    text = p.read_text()
    if p.suffix == ".toml":
        try:
            import tomllib
        except ImportError:  # python < 3.11
            import tomli as tomllib
        return tomllib.loads(text)
    return jsonio.loads(text)


def _effective(ctx: click.Context, file_cfg: dict, **defaults):
    """flags > config file > defaults, per parameter name."""
    out = {}
    for name, default in defaults.items():
        src = ctx.get_parameter_source(name)
        if src is not None and src.name != "DEFAULT":
            out[name] = ctx.params[name]
        elif name in file_cfg:
            out[name] = file_cfg[name]
        else:
            out[name] = default
    return out


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON or TOML config file; flags override it.")
@click.pass_context
def main(ctx, config_path):
    """Geometric camera-memory retrieval engine and steering simulator."""
    ctx.ensure_object(dict)
    ctx.obj["file_cfg"] = _load_config_file(config_path) if config_path else {}


@main.command()
@click.option("--density", type=float, default=1.0, help="landmarks per 100 m^2")
@click.option("--occluders", type=int, default=4)
@click.option("--bounds", nargs=4, type=float, default=(0.0, 0.0, 60.0, 60.0))
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(), required=True)
@click.pass_context
def worldgen(ctx, density, occluders, bounds, seed, out):
    """Generate a landmark world and write it as JSON."""
    cfg = _effective(ctx, ctx.obj["file_cfg"], density=density,
                     occluders=occluders, bounds=tuple(bounds), seed=seed)
    world = generate_world(cfg["density"], cfg["occluders"], tuple(cfg["bounds"]), cfg["seed"])
    save_world(world, out)
    click.echo(jsonio.dumps17({"landmarks": len(world.landmarks),
                               "occluders": len(world.occluders),
                               "effective_config": cfg, "out": str(out)}))


@main.command()
@click.option("--kind", type=click.Choice(["roam", "rotate-return", "loop"]), default="roam")
@click.option("--frames", type=int, default=1001)
@click.option("--bounds", nargs=4, type=float, default=(0.0, 0.0, 60.0, 60.0))
@click.option("--control-points", type=int, default=12)
@click.option("--seed", type=int, default=0)
@click.option("--degrees", type=float, default=360.0, help="rotate-return sweep")
@click.option("--radius", type=float, default=8.0, help="loop radius")
@click.option("--out", type=click.Path(), required=True)
@click.pass_context
def trajgen(ctx, kind, frames, bounds, control_points, seed, degrees, radius, out):
    """Generate a camera trajectory and write it as JSONL."""
    cfg = _effective(ctx, ctx.obj["file_cfg"], kind=kind, frames=frames,
                     bounds=tuple(bounds), control_points=control_points,
                     seed=seed, degrees=degrees, radius=radius)
    if cfg["kind"] == "roam":
        traj = generate_roam(RoamSpec(cfg["frames"], tuple(cfg["bounds"]),
                                      cfg["control_points"], cfg["seed"]))
    elif cfg["kind"] == "rotate-return":
        x0, y0, x1, y1 = cfg["bounds"]
        start = CameraPose((x0 + x1) / 2, (y0 + y1) / 2, 0.0)
        traj = rotate_and_return(start, cfg["degrees"], cfg["frames"])
    else:
        x0, y0, x1, y1 = cfg["bounds"]
        traj = loop_roam(((x0 + x1) / 2, (y0 + y1) / 2), cfg["radius"], cfg["frames"])
    save_trajectory(traj, out)
    click.echo(jsonio.dumps17({"frames": len(traj), "segments": traj.num_segments(),
                               "effective_config": cfg, "out": str(out)}))


@main.command("check-traj")
@click.argument("path", type=click.Path(exists=True))
def check_traj(path):
    """Audit a trajectory against the per-segment motion constraints."""
    report = check_constraints(load_trajectory(path))
    doc = {
        "passed": report.passed,
        "segments": [
            {"index": s.index, "displacement": s.displacement,
             "net_yaw_deg": s.net_yaw_deg, "cum_yaw_deg": s.cum_yaw_deg,
             "passed": s.passed}
            for s in report.segments
        ],
    }
    click.echo(jsonio.dumps17(doc))
    if not report.passed:
        sys.exit(1)


@main.command("eval")
@click.option("--worlds", type=int, default=3, help="number of seeded worlds")
@click.option("--bounds", nargs=4, type=float, default=(0.0, 0.0, 40.0, 40.0))
@click.option("--strategy", "strategies", multiple=True,
              type=click.Choice(STRATEGY_CHOICES), default=STRATEGY_CHOICES)
@click.option("--k", type=int, default=20)
@click.option("--seed", type=int, default=0)
@click.option("--json-out", type=click.Path(), default=None)
@click.pass_context
def eval_cmd(ctx, worlds, bounds, strategies, k, seed, json_out):
    """Compare retrieval strategies on revisiting fixture trajectories."""
    cfg = _effective(ctx, ctx.obj["file_cfg"], worlds=worlds, bounds=tuple(bounds),
                     strategies=tuple(strategies), k=k, seed=seed)
    bounds = tuple(cfg["bounds"])
    cx, cy = (bounds[0] + bounds[2]) / 2, (bounds[1] + bounds[3]) / 2
    world_models = [
        generate_world(2.0, 0, bounds, seed=cfg["seed"] + i)
        for i in range(cfg["worlds"])
    ]
    trajectories = [
        rotate_and_return(CameraPose(cx, cy, 0.0), 180, 308),
        rotate_and_return(CameraPose(cx, cy, 0.0), 360, 308),
        loop_roam((cx, cy), min(bounds[2] - bounds[0], bounds[3] - bounds[1]) / 5, 462),
    ]
    report = compare_strategies(
        world_models, trajectories,
        [StrategyKind(s) for s in cfg["strategies"]],
        RetrievalConfig(k=cfg["k"], seed=cfg["seed"]),
    )
    click.echo(report.to_table())
    if json_out:
        Path(json_out).write_text(report.to_json() + "\n")


@main.command()
@click.option("--frames", type=int, default=10000)
@click.option("--queries", type=int, default=1000)
@click.option("--extent", type=float, default=200.0)
@click.option("--seed", type=int, default=0)
@click.option("--calibration-pairs", type=int, default=0,
              help="also run a heuristic-vs-oracle calibration of this size")
@click.pass_context
def bench(ctx, frames, queries, extent, seed, calibration_pairs):
    """Benchmark grid-pruned vs naive retrieval (and optional calibration)."""
    cfg = _effective(ctx, ctx.obj["file_cfg"], frames=frames, queries=queries,
                     extent=extent, seed=seed, calibration_pairs=calibration_pairs)
    report = bench_retrieval(cfg["frames"], seed=cfg["seed"],
                             extent=cfg["extent"], queries=cfg["queries"])
    click.echo(report.to_json())
    if cfg["calibration_pairs"] > 0:
        cal = calibration_run(cfg["calibration_pairs"],
                              OverlapConfig(oracle_samples=1024), seed=cfg["seed"])
        click.echo(cal.to_json())


@main.command()
@click.option("--host", default=None, help="bind address (env COVIS_HOST)")
@click.option("--port", type=int, default=None, help="bind port (env COVIS_PORT)")
@click.option("--log-level", default=None, help="uvicorn log level (env COVIS_LOG_LEVEL)")
def serve(host, port, log_level):
    """Run the steering gateway HTTP server."""
    import uvicorn

    host = host or os.environ.get("COVIS_HOST", "127.0.0.1")
    port = port or int(os.environ.get("COVIS_PORT", "8077"))
    log_level = log_level or os.environ.get("COVIS_LOG_LEVEL", "info")
    uvicorn.run(create_app(), host=host, port=port, log_level=log_level)


@main.command("session-replay")
@click.argument("log_path", type=click.Path(exists=True))
@click.option("--create-request", "create_path", type=click.Path(exists=True),
              default=None, help="JSON session-create request used for the recording")
def session_replay(log_path, create_path):
    """Replay a recorded step log and verify results match byte for byte."""
    create_request = jsonio.loads(Path(create_path).read_text()) if create_path else {}
    lines = [l for l in Path(log_path).read_text().splitlines() if l.strip()]
    replayed = replay_step_log(lines, create_request)
    mismatches = []
    for i, (line, result) in enumerate(zip(lines, replayed)):
        recorded = jsonio.loads(line)["result"]
        if jsonio.dumps17(recorded) != jsonio.dumps17(result):
            mismatches.append(i)
    click.echo(jsonio.dumps17({"steps": len(replayed), "mismatches": mismatches}))
    if mismatches:
        sys.exit(1)


if __name__ == "__main__":
    main()
