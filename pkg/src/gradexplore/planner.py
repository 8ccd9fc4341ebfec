"""Initial guess: goal scoring/selection, RRT through known-free space, shortcutting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .boundariness import BoundarinessMap
from .collision import point_free, segment_free, traversable_mask
from .geometry import Path, ViewPoint, polyline_length, world_to_cell, wrap_angle
from .gridmap import LogOddsMap
from .infogain import fov_mask
from .world import SensorSpec


class NoGoalError(RuntimeError):
    pass


class PlanningError(RuntimeError):
    pass


@dataclass(frozen=True)
class GoalScoreParams:
    lambda_distance: float = 0.1  # per meter
    lambda_obstacles: float = 0.05  # per occupied cell
    box_half_width: float = 1.0  # meters
    samples: int = 200
    occlusion: bool = True  # footprint stops at known-occupied cells
    # nearer candidates only win when no candidate is far enough; such paths carry no samples
    min_distance: float = 0.6  # meters

    def __post_init__(self):
        if not (0 < self.lambda_distance < 1 and 0 < self.lambda_obstacles < 1):
            raise ValueError("decay weights must lie in (0, 1)")
        if self.samples < 1:
            raise ValueError("need at least one goal sample")
        if self.box_half_width < 0:
            raise ValueError("box_half_width must be non-negative")
        if self.min_distance < 0:
            raise ValueError("min_distance must be non-negative")


@dataclass(frozen=True)
class RrtParams:
    max_iterations: int = 3000
    steer_step: float = 1.5
    goal_bias: float = 0.1
    shortcut_attempts: int = 200
    inflation: float = 0.0

    def __post_init__(self):
        if self.steer_step <= 0:
            raise ValueError("steer_step must be positive")
        if not 0 <= self.goal_bias <= 1:
            raise ValueError("goal_bias must lie in [0, 1]")


def occupied_count(odds: LogOddsMap, x: float, y: float, half_width: float) -> int:
    res = odds.resolution
    m, n = odds.shape
    r = int(math.floor(half_width / res + 1e-9))
    i, j = world_to_cell(x, y, res)
    block = odds.values[max(i - r, 0):min(i + r + 1, m), max(j - r, 0):min(j + r + 1, n)]
    return int(np.count_nonzero(block > 0))


def visible_mask(xi, odds: LogOddsMap, spec: SensorSpec, step: float | None = None) -> np.ndarray:
    """Cells reached by the sensor's beams from ``xi`` through the belief map.

    Each beam is sampled every ``step`` meters (a quarter cell by default) and
    stops at the first known-occupied cell, which is itself included.  Unknown
    cells do not block.
    """
    res = odds.resolution
    m, n = odds.shape
    step = step or res / 4
    ang = xi[2] + spec.bearings()
    d = np.arange(0.0, spec.max_range + 1e-12, step)
    I = np.floor((xi[0] + np.cos(ang)[:, None] * d) / res).astype(int)
    J = np.floor((xi[1] + np.sin(ang)[:, None] * d) / res).astype(int)
    inside = (I >= 0) & (I < m) & (J >= 0) & (J < n)
    blocked = ~inside
    blocked[inside] = odds.values[I[inside], J[inside]] > 0
    first = np.where(blocked.any(axis=1), blocked.argmax(axis=1), d.size)
    keep = inside & (np.arange(d.size)[None, :] <= first[:, None])
    mask = np.zeros((m, n), dtype=bool)
    mask[I[keep], J[keep]] = True
    return mask


def goal_footprint(xi, odds: LogOddsMap, spec: SensorSpec, occlusion: bool = True) -> np.ndarray:
    if occlusion:
        return visible_mask(xi, odds, spec)
    return fov_mask(xi, spec, odds.resolution, odds.shape)


def score_goal_candidate(xi, bd: BoundarinessMap, odds: LogOddsMap, start, spec: SensorSpec,
                         params: GoalScoreParams = GoalScoreParams()) -> float:
    """Boundariness in the candidate's field of view, decayed by distance and clutter."""
    total = float(np.sum(bd.values[goal_footprint(xi, odds, spec, params.occlusion)]))
    if total == 0.0:
        return 0.0
    dist = math.hypot(xi[0] - start[0], xi[1] - start[1])
    n_occ = occupied_count(odds, xi[0], xi[1], params.box_half_width)
    return total * math.exp(-params.lambda_distance * dist) * math.exp(-params.lambda_obstacles * n_occ)


def sample_free_poses(odds: LogOddsMap, count: int, rng: np.random.Generator,
                      mask: np.ndarray | None = None) -> np.ndarray:
    free = np.argwhere(odds.values < 0 if mask is None else mask)
    if len(free) == 0:
        raise NoGoalError("no known-free cell to sample a goal from")
    pick = free[rng.integers(0, len(free), size=count)]
    offs = rng.random((count, 2))
    theta = rng.uniform(-math.pi, math.pi, size=count)
    xy = (pick + offs) * odds.resolution
    return np.column_stack([xy, theta])


def select_goal(bd: BoundarinessMap, odds: LogOddsMap, start, spec: SensorSpec,
                params: GoalScoreParams, rng: np.random.Generator,
                mask: np.ndarray | None = None) -> tuple[ViewPoint, float]:
    """Best of ``params.samples`` uniform free-space candidates; first wins ties.

    Candidates within ``params.min_distance`` of ``start`` rank below every
    farther one.
    """
    cands = sample_free_poses(odds, params.samples, rng, mask)
    best, best_key = 0, (False, -math.inf)
    for k, c in enumerate(cands):
        s = score_goal_candidate(c, bd, odds, start, spec, params)
        key = (math.hypot(c[0] - start[0], c[1] - start[1]) >= params.min_distance, s)
        if key > best_key:
            best, best_key = k, key
    return ViewPoint(*map(float, cands[best])), best_key[1]


def _steer(a: np.ndarray, b: np.ndarray, step: float) -> np.ndarray:
    d = b - a
    dist = math.hypot(d[0], d[1])
    return b.copy() if dist <= step else a + d * (step / dist)


def plan_rrt(start, goal, odds: LogOddsMap, params: RrtParams, rng: np.random.Generator) -> Path:
    """RRT between two known-free poses, shortcut-smoothed, headings assigned."""
    res = odds.resolution
    mask = traversable_mask(odds, params.inflation)
    s = np.array(start[:2], dtype=float)
    g = np.array(goal[:2], dtype=float)
    for name, p in (("start", s), ("goal", g)):
        if not point_free(mask, p[0], p[1], res):
            raise PlanningError(f"{name} is not in known-free space")
    if np.array_equal(s, g):
        return Path(np.array([start], dtype=float))

    width, height = odds.width * res, odds.height * res
    nodes = [s]
    parents = [-1]
    found = -1
    if segment_free(mask, s, g, res):
        nodes.append(g)
        parents.append(0)
        found = 1
    for _ in range(params.max_iterations if found < 0 else 0):
        if rng.random() < params.goal_bias:
            target = g
        else:
            target = rng.random(2) * (width, height)
        arr = np.asarray(nodes)
        near = int(np.argmin(np.sum((arr - target) ** 2, axis=1)))
        new = _steer(arr[near], target, params.steer_step)
        if not point_free(mask, new[0], new[1], res) or not segment_free(mask, arr[near], new, res):
            continue
        nodes.append(new)
        parents.append(near)
        if math.hypot(*(g - new)) <= params.steer_step and segment_free(mask, new, g, res):
            nodes.append(g)
            parents.append(len(nodes) - 2)
            found = len(nodes) - 1
            break
    if found < 0:
        raise PlanningError(f"no path found within {params.max_iterations} iterations")
    chain = []
    k = found
    while k >= 0:
        chain.append(nodes[k])
        k = parents[k]
    pts = np.array(chain[::-1])
    pts = shortcut(pts, mask, res, params.shortcut_attempts, rng)
    return Path(assign_headings(pts, start[2], goal[2]))


def _point_at(pts: np.ndarray, cum: np.ndarray, s: float) -> tuple[int, np.ndarray]:
    k = int(np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(pts) - 2))
    seg = cum[k + 1] - cum[k]
    t = 0.0 if seg == 0 else (s - cum[k]) / seg
    return k, pts[k] + t * (pts[k + 1] - pts[k])


def shortcut(pts: np.ndarray, mask: np.ndarray, res: float, attempts: int,
             rng: np.random.Generator) -> np.ndarray:
    """Replace random sub-paths by straight segments when those are collision-free."""
    pts = np.asarray(pts, dtype=float)
    for _ in range(attempts):
        if len(pts) < 3:
            break
        seg = np.sqrt(np.sum(np.diff(pts, axis=0) ** 2, axis=1))
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        s1, s2 = np.sort(rng.random(2) * cum[-1])
        k1, p1 = _point_at(pts, cum, s1)
        k2, p2 = _point_at(pts, cum, s2)
        if k1 == k2 or not segment_free(mask, p1, p2, res):
            continue
        new = np.vstack([pts[:k1 + 1], p1, p2, pts[k2 + 1:]])
        # drop duplicated vertices created at segment ends
        keep = np.ones(len(new), dtype=bool)
        keep[1:] = np.any(np.diff(new, axis=0) != 0, axis=1)
        new = new[keep]
        if polyline_length(np.column_stack([new, np.zeros(len(new))])) <= cum[-1]:
            pts = new
    return merge_close(pts, 0.25 * res, mask, res)


def merge_close(pts: np.ndarray, tol: float, mask: np.ndarray, res: float) -> np.ndarray:
    """Drop vertices within ``tol`` of the last kept one when the bridge stays free."""
    if len(pts) < 3:
        return pts
    kept = [pts[0]]
    skipped: list[np.ndarray] = []
    for q, p in enumerate(pts[1:], 1):
        last = q == len(pts) - 1
        if not last and math.hypot(*(p - kept[-1])) < tol:
            skipped.append(p)
            continue
        if skipped and not segment_free(mask, kept[-1], p, res):
            kept.extend(skipped)
        skipped = []
        kept.append(p)
    return np.array(kept)


def assign_headings(pts: np.ndarray, start_theta: float, goal_theta: float) -> np.ndarray:
    """Start keeps its heading, interior vertices face their outgoing segment,
    the goal keeps its sampled heading; the sequence is unwrapped."""
    pts = np.asarray(pts, dtype=float)
    d = np.diff(pts, axis=0)
    heads = np.arctan2(d[:, 1], d[:, 0])
    theta = np.concatenate([[start_theta], heads[1:], [goal_theta]]) if len(pts) > 1 else np.array([start_theta])
    return np.column_stack([pts, np.unwrap(theta)])


def densify(path: Path, spacing: float) -> Path:
    """Split every segment into equal pieces no longer than ``spacing``.

    Inserted vertices face along their segment.
    """
    poses = path.poses
    if len(poses) < 2:
        return Path(poses.copy())
    out = [poses[0]]
    for a, b in zip(poses[:-1], poses[1:]):
        L = math.hypot(*(b[:2] - a[:2]))
        pieces = max(int(math.ceil(L / spacing - 1e-9)), 1)
        heading = a[2] + wrap_angle(math.atan2(b[1] - a[1], b[0] - a[0]) - a[2])
        for q in range(1, pieces):
            t = q / pieces
            out.append(np.array([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), heading]))
        out.append(b)
    return Path(np.array(out))
