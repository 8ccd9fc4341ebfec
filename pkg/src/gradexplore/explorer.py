"""Closed sense / plan / optimise / execute loop over a simulated world."""

from __future__ import annotations

import json
import math
import zlib
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from .boundariness import (BoundarinessMap, BoundarinessParams, compute_boundariness_map,
                           refresh_boundariness)
from .geometry import Path, ViewPoint
from .gridmap import L_MAX, L_MIN, InverseSensorModel, LogOddsMap
from .infogain import PathSamples, path_information_gain, sampled_poses
from .optimizer import Objective, OptimizationResult, OptimizerConfig, optimize_path
from .planner import (GoalScoreParams, NoGoalError, PlanningError, RrtParams, densify,
                      plan_rrt, select_goal)
from .world import InvalidPoseError, SensorSpec, WorldMap, cast_scan


@dataclass(frozen=True)
class TerminationCriteria:
    bd_threshold: float = 0.5
    min_boundary_cells: int = 5
    gain_window: int = 3
    max_episodes: int = 200

    def __post_init__(self):
        if not 0 < self.bd_threshold < 1:
            raise ValueError("bd_threshold must lie in (0, 1)")
        if self.min_boundary_cells < 0 or self.gain_window < 1 or self.max_episodes < 0:
            raise ValueError("need min_boundary_cells >= 0, gain_window >= 1, max_episodes >= 0")


@dataclass(frozen=True)
class ExplorationSettings:
    sensor: SensorSpec = field(default_factory=SensorSpec)
    boundariness: BoundarinessParams = field(default_factory=BoundarinessParams)
    alpha: float = 0.1
    weights: tuple[float, float, float] = (1.0, 1.0, 0.1)
    endpoint_mode: str = "ignore"  # "exclude" empties the footprint of short paths
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    goal: GoalScoreParams = field(default_factory=GoalScoreParams)
    rrt: RrtParams = field(default_factory=RrtParams)
    termination: TerminationCriteria = field(default_factory=TerminationCriteria)
    optimize: bool = True
    vertex_spacing: float = 0.0  # 0 -> two cells, the view-point spacing of the path gain
    planning_retries: int = 5
    l_min: float = L_MIN
    l_max: float = L_MAX


def stream(seed: int, label: str) -> np.random.Generator:
    """Independent generator per pipeline stage, keyed by a fixed label."""
    return np.random.default_rng([seed, zlib.crc32(label.encode())])


@dataclass
class CoverageMetrics:
    free_correct: float
    free_misclassified: float
    free_unknown: float
    occupied_correct: float
    occupied_misclassified: float
    occupied_unknown: float
    unknown_fraction: float
    path_length: float = 0.0

    @property
    def coverage(self) -> float:
        return self.free_correct


def coverage_metrics(odds: LogOddsMap, world: WorldMap, path_length: float = 0.0) -> CoverageMetrics:
    v, gt = odds.values, world.cells
    free, occ = ~gt, gt

    def frac(sel, cond):
        n = int(np.count_nonzero(sel))
        return float(np.count_nonzero(sel & cond)) / n if n else 1.0

    return CoverageMetrics(
        frac(free, v < 0), frac(free, v > 0), frac(free, v == 0),
        frac(occ, v > 0), frac(occ, v < 0), frac(occ, v == 0),
        float(np.count_nonzero(v == 0)) / v.size, float(path_length))


def segment_hits_obstacle(world: WorldMap, p, q, step_fraction: float = 0.1) -> bool:
    """Sub-cell sampling of p-q against the ground truth."""
    res = world.resolution
    L = math.hypot(q[0] - p[0], q[1] - p[1])
    n = max(int(math.ceil(L / (res * step_fraction))), 1)
    for t in np.linspace(0.0, 1.0, n + 1):
        x, y = p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])
        if not world.is_free_point(x, y):
            return True
    return False


@dataclass
class EpisodeRecord:
    episode: int
    goal: list[float]
    goal_score: float
    vertices: int
    path_length: float
    cumulative_length: float
    f_initial: float
    f_final: float
    gain_initial: float
    gain: float
    iterations: int
    monotone: bool
    endpoints_fixed: bool
    collision_free: bool
    boundary_cells: int
    coverage: dict


@dataclass
class ExplorationReport:
    status: str
    world: str
    seed: int
    optimize: bool
    episodes: list[EpisodeRecord]
    initial: dict
    final: dict
    odds: LogOddsMap | None = None
    paths: list[Path] = field(default_factory=list)
    traces: list[OptimizationResult | None] = field(default_factory=list)
    snapshots: list[tuple[LogOddsMap, BoundarinessMap]] = field(default_factory=list)

    @property
    def cumulative_length(self) -> float:
        return self.final["path_length"]

    @property
    def coverage(self) -> float:
        return self.final["free_correct"]

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "world": self.world,
            "seed": self.seed,
            "optimize": self.optimize,
            "episode_count": len(self.episodes),
            "initial": self.initial,
            "final": self.final,
            "episodes": [asdict(e) for e in self.episodes],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def coverage_csv(self) -> str:
        rows = ["episode,coverage,cumulative_length"]
        rows.append(f"0,{self.initial['free_correct']!r},0.0")
        rows += [f"{e.episode},{e.coverage['free_correct']!r},{e.cumulative_length!r}" for e in self.episodes]
        return "\n".join(rows) + "\n"


def execution_sequence(path: Path, samples: PathSamples) -> np.ndarray:
    """Vertices and sampled points in travel order."""
    poses = path.poses
    if len(samples) == 0:
        return poses
    extra = sampled_poses(poses, samples)
    keys = [(float(k), 0.0) for k in range(len(poses))] + [(float(s), float(t)) for s, t in zip(samples.seg, samples.t)]
    allp = np.vstack([poses, extra])
    order = sorted(range(len(allp)), key=lambda q: keys[q])
    return allp[order]


def run_exploration(world: WorldMap, start: ViewPoint, settings: ExplorationSettings = ExplorationSettings(),
                    seed: int = 0, keep_snapshots: bool = False) -> ExplorationReport:
    """Explore ``world`` from ``start`` until the boundary count or the gain window says stop."""
    if not world.is_free_point(start[0], start[1]):
        raise InvalidPoseError("start pose must lie in free space")
    spec, res = settings.sensor, world.resolution
    model = InverseSensorModel(spec)
    term = settings.termination
    rng_goal, rng_rrt = stream(seed, "goal"), stream(seed, "rrt")
    rng_samples, rng_noise = stream(seed, "samples"), stream(seed, "noise")
    spacing = settings.vertex_spacing or 2 * res

    odds = LogOddsMap(world.width, world.height, res, settings.l_min, settings.l_max)
    bd = compute_boundariness_map(odds, settings.boundariness)

    def sense(pose):
        cells = odds.update_with_scan(cast_scan(world, pose, spec, rng_noise), model)
        refresh_boundariness(bd, odds, cells)

    pose = np.asarray(start, dtype=float)
    sense(pose)
    window = deque([1.0] * term.gain_window, maxlen=term.gain_window)
    cumulative = 0.0
    report = ExplorationReport("running", world.name, seed, settings.optimize, [],
                               asdict(coverage_metrics(odds, world)), {})
    while True:
        if not (bd.count_above(term.bd_threshold) > term.min_boundary_cells and sum(window) != 0):
            report.status = "terminated"
            break
        if len(report.episodes) >= term.max_episodes:
            report.status = "iteration-cap"
            break
        episode = len(report.episodes) + 1

        path = goal = None
        for _ in range(settings.planning_retries):
            try:
                goal, score = select_goal(bd, odds, pose, spec, settings.goal, rng_goal)
                path = plan_rrt(pose, goal, odds, settings.rrt, rng_rrt)
                break
            except (NoGoalError, PlanningError):
                continue
        if path is None:
            report.status = "planner-exhausted"
            break

        if len(path) < 2:
            path = Path(np.vstack([path.poses, path.poses]))
        path = densify(path, spacing)
        before = path.poses.copy()
        obj = Objective.for_path(path, bd, spec, res, rng_samples, alpha=settings.alpha,
                                 weights=settings.weights, endpoint_mode=settings.endpoint_mode)
        result = None
        if settings.optimize:
            result = optimize_path(path, obj, settings.optimizer, odds, settings.rrt.inflation)
            path = result.path
            f0, f1 = result.initial, result.final
        else:
            f0 = f1 = obj.evaluate(path.poses[1:-1])
        gain = path_information_gain(path, bd, spec, res, samples=obj.samples,
                                     endpoint_mode=settings.endpoint_mode).gain
        window.append(gain)

        seq = execution_sequence(path, obj.samples)
        collision_free = not any(segment_hits_obstacle(world, a, b) for a, b in zip(seq[:-1], seq[1:]))
        for xi in seq:
            sense(xi)
        pose = path.poses[-1].copy()
        length = path.length()
        cumulative += length

        values = result.accepted_values if result else [f0.f]
        monotone = all(b <= a for a, b in zip(values, values[1:]))
        metrics = coverage_metrics(odds, world, cumulative)
        report.episodes.append(EpisodeRecord(
            episode, [float(v) for v in goal], float(score), len(path), length, cumulative,
            f0.f, f1.f, f0.gain, gain, len(result.trace) - 1 if result else 0, monotone,
            bool(np.array_equal(before[[0, -1]], path.poses[[0, -1]])), collision_free,
            bd.count_above(term.bd_threshold), asdict(metrics)))
        report.paths.append(path)
        report.traces.append(result)
        if keep_snapshots:
            report.snapshots.append((odds.copy(), bd.copy()))

    report.final = asdict(coverage_metrics(odds, world, cumulative))
    report.odds = odds
    return report
