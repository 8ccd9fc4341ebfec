"""Command-line front end: ``gradexplore <command> [options]``."""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
from pathlib import Path as FsPath

import numpy as np

from .boundariness import compute_boundariness_map
from .config import ConfigError, ScenarioConfig
from .explorer import ExplorationReport, run_exploration, stream
from .geometry import Path, ViewPoint
from .gridmap import InverseSensorModel, LogOddsMap
from .infogain import build_view_filter, path_information_gain, view_information_gain
from .optimizer import Objective, finite_difference_gradient, relative_error
from .planner import densify, plan_rrt, select_goal
from .world import cast_scan

GRADCHECK_LIMIT = 1e-4
OK_STATUSES = ("terminated", "complete")


def atomic_write(path: FsPath, data: bytes | str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = FsPath(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode()
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_explore_outputs(report: ExplorationReport, out: FsPath, plots: bool = False) -> None:
    atomic_write(out / "report.json", report.to_json())
    atomic_write(out / "coverage.csv", report.coverage_csv())
    for k, (path, trace) in enumerate(zip(report.paths, report.traces), 1):
        atomic_write(out / f"path_{k}.csv", path.to_csv())
        if trace is not None:
            atomic_write(out / f"trace_{k}.csv", trace.trace_csv())
    for k, (odds, bd) in enumerate(report.snapshots, 1):
        atomic_write(out / f"map_{k}.pgm", odds.to_pgm())
        atomic_write(out / f"bd_{k}.pgm", bd.to_pgm())
    if report.odds is not None:
        atomic_write(out / "map_final.pgm", report.odds.to_pgm())
        atomic_write(out / "logodds_final.csv", report.odds.to_csv())
    if plots:
        from . import plotting

        atomic_write(out / "coverage.png", plotting.coverage_curve({"explore": report}))
        atomic_write(out / "map.png", plotting.map_with_paths(report.odds, report.paths, report.world))


def cmd_explore(cfg: ScenarioConfig, args) -> int:
    world = cfg.load_world()
    settings = cfg.settings
    if args.no_opt:
        import dataclasses

        settings = dataclasses.replace(settings, optimize=False)
    report = run_exploration(world, cfg.start, settings, cfg.seed, keep_snapshots=args.snapshots)
    out = FsPath(args.output or cfg.output)
    write_explore_outputs(report, out, args.plots)
    print(f"status={report.status} episodes={len(report.episodes)} "
          f"coverage={report.coverage:.4f} path_length={report.cumulative_length:.3f} -> {out}")
    return 0 if report.status in OK_STATUSES else 1


def _snapshot(args, cfg: ScenarioConfig) -> LogOddsMap:
    """Log-odds map from ``--map``, or the map after a single scan at the start pose."""
    if args.map:
        return LogOddsMap.from_csv(FsPath(args.map).read_text())
    world = cfg.load_world()
    s = cfg.settings
    odds = LogOddsMap(world.width, world.height, world.resolution, s.l_min, s.l_max)
    odds.update_with_scan(cast_scan(world, cfg.start, s.sensor), InverseSensorModel(s.sensor))
    return odds


def cmd_gain(cfg: ScenarioConfig, args) -> int:
    odds = _snapshot(args, cfg)
    s = cfg.settings
    bd = compute_boundariness_map(odds, s.boundariness)
    path = Path.from_csv(FsPath(args.path).read_text())
    for k, xi in enumerate(path.poses):
        print(f"view {k}: x={xi[0]:.4f} y={xi[1]:.4f} theta={xi[2]:.4f} "
              f"IG_view={view_information_gain(xi, bd, s.sensor, odds.resolution)!r}")
    if len(path) >= 2:
        mode = args.endpoint_mode or s.endpoint_mode
        res = path_information_gain(path, bd, s.sensor, odds.resolution,
                                    rng=stream(cfg.seed, "samples"), endpoint_mode=mode)
        print(f"IG_path={res.gain!r} (sampled points: {len(res.samples)}, endpoint mode: {mode})")
    return 0


def gradcheck_instances(cfg: ScenarioConfig, count: int, min_margin: float = 1e-3):
    """Objective and interior vertex sets built from the scenario's first planning episode.

    The planned path is the first instance; the rest are random perturbations
    of it kept only when every piecewise branch is at least ``min_margin`` away.
    """
    world = cfg.load_world()
    s = cfg.settings
    odds = LogOddsMap(world.width, world.height, world.resolution, s.l_min, s.l_max)
    odds.update_with_scan(cast_scan(world, cfg.start, s.sensor), InverseSensorModel(s.sensor))
    bd = compute_boundariness_map(odds, s.boundariness)
    goal, _ = select_goal(bd, odds, cfg.start, s.sensor, s.goal, stream(cfg.seed, "goal"))
    path = plan_rrt(cfg.start, goal, odds, s.rrt, stream(cfg.seed, "rrt"))
    if len(path) < 2:
        path = Path(np.vstack([path.poses, path.poses]))
    path = densify(path, s.vertex_spacing or 2 * world.resolution)
    obj = Objective.for_path(path, bd, s.sensor, world.resolution, stream(cfg.seed, "samples"),
                             alpha=s.alpha, weights=s.weights, endpoint_mode=s.endpoint_mode)
    rng = stream(cfg.seed, "gradcheck")
    base = path.interior
    out = []
    tries = 0
    while len(out) < count and tries < 100 * count:
        tries += 1
        X = base if not out and tries == 1 else base + rng.normal(0, [0.05, 0.05, 0.2], size=base.shape)
        if obj.branch_margin(X) >= min_margin:
            out.append(X)
    return obj, out


def cmd_gradcheck(cfg: ScenarioConfig, args) -> int:
    obj, instances = gradcheck_instances(cfg, args.instances)
    if obj.n_interior == 0 or not instances:
        print("no interior vertices to check", file=sys.stderr)
        return 1
    worst = 0.0
    for X in instances:
        worst = max(worst, relative_error(obj.gradient(X), finite_difference_gradient(obj, X, args.step)))
    ok = worst < GRADCHECK_LIMIT
    print(f"instances={len(instances)} interior_vertices={obj.n_interior} "
          f"max_relative_error={worst:.3e} {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def cmd_boundariness(cfg: ScenarioConfig, args) -> int:
    odds = _snapshot(args, cfg)
    bd = compute_boundariness_map(odds, cfg.settings.boundariness)
    atomic_write(FsPath(args.output), bd.to_pgm())
    print(f"cells above {cfg.settings.termination.bd_threshold}: "
          f"{bd.count_above(cfg.settings.termination.bd_threshold)} -> {args.output}")
    return 0


def cmd_filter(cfg: ScenarioConfig, args) -> int:
    world = cfg.load_world()
    x, y, th = args.pose if args.pose else cfg.start
    if args.pose:
        th = math.radians(th)
    pose = ViewPoint(x, y, th)
    phi = build_view_filter(pose, cfg.settings.sensor, world.resolution, world.shape)
    atomic_write(FsPath(args.output), phi.to_csv())
    if args.png:
        from .plotting import filter_image

        atomic_write(FsPath(args.png), filter_image(phi.to_dense(world.shape), world.resolution, pose))
    print(f"{len(phi.values)} cells -> {args.output}")
    return 0


COMMANDS = {
    "explore": cmd_explore,
    "gain": cmd_gain,
    "gradcheck": cmd_gradcheck,
    "boundariness": cmd_boundariness,
    "filter": cmd_filter,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="scenario file (key = value per line)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key; repeatable")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--print-config", action="store_true",
                        help="print the effective configuration and exit")

    parser = argparse.ArgumentParser(prog="gradexplore", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("explore", parents=[common], help="run the full exploration loop")
    p.add_argument("--no-opt", action="store_true", help="skip gradient optimization (RRT + shortcut baseline)")
    p.add_argument("--snapshots", action="store_true", help="write map_<k>.pgm and bd_<k>.pgm per episode")
    p.add_argument("--plots", action="store_true", help="also write coverage.png and map.png")
    p.add_argument("-o", "--output", help="output directory (overrides the config)")

    p = sub.add_parser("gain", parents=[common], help="information gain of a path file")
    p.add_argument("path", help="CSV with x,y,theta rows")
    p.add_argument("--map", help="log-odds CSV snapshot; default: one scan from the start pose")
    p.add_argument("--endpoint-mode", choices=("exclude", "ignore"))

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference audit of the objective gradient")
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--step", type=float, default=1e-6)

    p = sub.add_parser("boundariness", parents=[common], help="boundariness PGM of a map snapshot")
    p.add_argument("--map", help="log-odds CSV snapshot; default: one scan from the start pose")
    p.add_argument("-o", "--output", default="bd.pgm")

    p = sub.add_parser("filter", parents=[common], help="fuzzy filter CSV of one view-point")
    p.add_argument("--pose", type=float, nargs=3, metavar=("X", "Y", "THETA_DEG"))
    p.add_argument("-o", "--output", default="filter.csv")
    p.add_argument("--png", help="also render the filter to this PNG")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    try:
        if args.config:
            cfg = ScenarioConfig.load(args.config, overrides)
        else:
            cfg = ScenarioConfig.from_text("", "<defaults>", FsPath.cwd(), overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.print_config:
        sys.stdout.write(cfg.to_text())
        return 0
    try:
        return COMMANDS[args.command](cfg, args)
    except (OSError, ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
