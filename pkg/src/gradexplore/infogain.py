"""Fuzzy visibility filters and the information gain of view-points and paths.

A view-point's filter covers the square of cells within ``2h`` cells of the
view-point's cell (``h = ceil(R_max / res)``).  Discounts use the distance and
bearing from the view-point's continuous position to each cell centre, which
is what makes the gain differentiable in (x, y, theta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boundariness import BoundarinessMap
from .geometry import Path, polyline_length, world_to_cell, wrap_angle
from .world import SensorSpec

ENDPOINT_MODES = ("exclude", "ignore")


def half_width(spec: SensorSpec, res: float) -> int:
    """h in cells; the filter box spans 2h cells either side."""
    return int(math.ceil(spec.max_range / res - 1e-9))


def distance_discount(delta, r_max: float):
    """1 inside R_max, linear down to 0 at 2*R_max, 0 beyond."""
    if isinstance(delta, np.ndarray):
        return np.where(delta < r_max, 1.0, np.where(delta <= 2 * r_max, (2 * r_max - delta) / r_max, 0.0))
    if delta < 0:
        raise ValueError("distance must be non-negative")
    if delta < r_max:
        return 1.0
    if delta <= 2 * r_max:
        return (2 * r_max - delta) / r_max
    return 0.0


def angle_discount(u, v, omega: float) -> float:
    """1 inside the field of view, (1 + u.v) / (1 + cos(omega/2)) outside."""
    uv = float(np.dot(u, v))
    c = math.cos(omega / 2)
    return 1.0 if uv >= c else (1.0 + uv) / (1.0 + c)


@dataclass
class FuzzyFilter:
    """Sparse map-cell -> discount mapping; its keys are the footprint."""

    values: dict[tuple[int, int], float] = field(default_factory=dict)

    @property
    def footprint(self) -> set[tuple[int, int]]:
        return set(self.values)

    def __len__(self):
        return len(self.values)

    def merge_max(self, other: "FuzzyFilter") -> None:
        vals = self.values
        for key, v in other.values.items():
            old = vals.get(key)
            if old is None or v > old:
                vals[key] = v

    def to_csv(self) -> str:
        rows = ["i,j,discount"] + [f"{i},{j},{v!r}" for (i, j), v in sorted(self.values.items())]
        return "\n".join(rows) + "\n"

    def to_dense(self, shape) -> np.ndarray:
        out = np.zeros(shape)
        for (i, j), v in self.values.items():
            out[i, j] = v
        return out


def box_indices(x: float, y: float, h: int, res: float, shape) -> tuple[np.ndarray, np.ndarray]:
    """Row-major (i, j) index arrays of the in-map part of a view-point's box."""
    ci, cj = world_to_cell(x, y, res)
    m, n = shape
    ii = np.arange(max(ci - 2 * h, 0), min(ci + 2 * h, m - 1) + 1)
    jj = np.arange(max(cj - 2 * h, 0), min(cj + 2 * h, n - 1) + 1)
    I, J = np.meshgrid(ii, jj, indexing="ij")
    return I.ravel(), J.ravel()


def box_mask(x: float, y: float, h: int, res: float, shape) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    ci, cj = world_to_cell(x, y, res)
    m, n = shape
    mask[max(ci - 2 * h, 0):max(min(ci + 2 * h + 1, m), 0), max(cj - 2 * h, 0):max(min(cj + 2 * h + 1, n), 0)] = True
    return mask


def discount_values(xi, I: np.ndarray, J: np.ndarray, spec: SensorSpec, res: float) -> np.ndarray:
    """Filter value for cells (I, J) seen from ``xi``; elementwise IEEE ops only."""
    x, y, theta = xi
    ux, uy = math.cos(theta), math.sin(theta)
    r_max = spec.max_range
    c = math.cos(spec.fov / 2)
    dx = (I + 0.5) * res - x
    dy = (J + 0.5) * res - y
    dist = np.sqrt(dx * dx + dy * dy)
    phi_d = distance_discount(dist, r_max)
    ci, cj = world_to_cell(x, y, res)
    own = ((I == ci) & (J == cj)) | (dist == 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        uv = (ux * dx + uy * dy) / dist
    phi_t = np.where(own | (uv >= c), 1.0, (1.0 + uv) / (1.0 + c))
    return phi_d * phi_t


def build_view_filter(xi, spec: SensorSpec, res: float, shape) -> FuzzyFilter:
    h = half_width(spec, res)
    I, J = box_indices(xi[0], xi[1], h, res, shape)
    vals = discount_values(xi, I, J, spec, res)
    return FuzzyFilter({(int(i), int(j)): float(v) for i, j, v in zip(I, J, vals)})


def view_information_gain(xi, bd: BoundarinessMap, spec: SensorSpec, res: float) -> float:
    h = half_width(spec, res)
    I, J = box_indices(xi[0], xi[1], h, res, bd.shape)
    vals = discount_values(xi, I, J, spec, res)
    return math.fsum((vals * bd.values[I, J]).tolist())


def fov_mask(xi, spec: SensorSpec, res: float, shape) -> np.ndarray:
    """Cells inside the sensor's field of view (both discounts equal to 1)."""
    h = half_width(spec, res)
    I, J = box_indices(xi[0], xi[1], h, res, shape)
    x, y, theta = xi
    dx = (I + 0.5) * res - x
    dy = (J + 0.5) * res - y
    dist = np.sqrt(dx * dx + dy * dy)
    ci, cj = world_to_cell(x, y, res)
    with np.errstate(invalid="ignore", divide="ignore"):
        uv = (math.cos(theta) * dx + math.sin(theta) * dy) / dist
    inside = (dist <= spec.max_range) & (((I == ci) & (J == cj)) | (dist == 0) | (uv >= math.cos(spec.fov / 2)))
    mask = np.zeros(shape, dtype=bool)
    mask[I[inside], J[inside]] = True
    return mask


# --- paths -----------------------------------------------------------------

@dataclass(frozen=True)
class PathSamples:
    """Frozen interpolation points: sample q sits at ``t[q]`` along segment ``seg[q]``."""

    seg: np.ndarray
    t: np.ndarray

    @classmethod
    def empty(cls) -> "PathSamples":
        return cls(np.zeros(0, dtype=int), np.zeros(0))

    def __len__(self):
        return len(self.seg)


def required_viewpoints(poses: np.ndarray, res: float) -> int:
    """N = ceil(L / (2 res))."""
    return int(math.ceil(polyline_length(poses) / (2 * res)))


def draw_samples(poses: np.ndarray, res: float, rng: np.random.Generator | None) -> PathSamples:
    """Stratified-uniform arc-length samples topping a path up to N view-points.

    Without a generator the samples sit at stratum midpoints.
    """
    k = len(poses) - 1
    length = polyline_length(poses)
    N = int(math.ceil(length / (2 * res)))
    if k < 1 or k - 1 >= N or length < res:
        return PathSamples.empty()
    count = N - (k - 1)
    u = rng.random(count) if rng is not None else np.full(count, 0.5)
    s = length * (np.arange(count) + u) / count
    seglen = np.sqrt(np.sum(np.diff(poses[:, :2], axis=0) ** 2, axis=1))
    cum = np.concatenate([[0.0], np.cumsum(seglen)])
    seg = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, k - 1)
    # skip zero-length segments
    while np.any(seglen[seg] == 0):
        bad = seglen[seg] == 0
        seg[bad] = np.minimum(seg[bad] + 1, k - 1)
    t = np.clip((s - cum[seg]) / seglen[seg], 0.0, 1.0)
    return PathSamples(seg.astype(int), t)


def sampled_poses(poses: np.ndarray, samples: PathSamples) -> np.ndarray:
    if len(samples) == 0:
        return np.zeros((0, 3))
    a = poses[samples.seg]
    b = poses[samples.seg + 1]
    t = samples.t[:, None]
    xy = a[:, :2] + t * (b[:, :2] - a[:, :2])
    th = a[:, 2] + samples.t * wrap_angle(b[:, 2] - a[:, 2])
    return np.column_stack([xy, th])


def path_viewpoints(poses: np.ndarray, samples: PathSamples) -> np.ndarray:
    """Interior vertices followed by the sampled points."""
    return np.vstack([poses[1:-1], sampled_poses(poses, samples)])


def endpoint_exclusion(poses: np.ndarray, spec: SensorSpec, res: float, shape, mode: str) -> np.ndarray:
    if mode not in ENDPOINT_MODES:
        raise ValueError(f"endpoint mode must be one of {ENDPOINT_MODES}")
    mask = np.zeros(shape, dtype=bool)
    if mode == "exclude":
        h = half_width(spec, res)
        for x, y, _ in (poses[0], poses[-1]):
            mask |= box_mask(x, y, h, res, shape)
    return mask


@dataclass
class PathGainResult:
    gain: float
    filter: FuzzyFilter
    sampled_points: np.ndarray
    samples: PathSamples


def path_information_gain(path: Path, bd: BoundarinessMap, spec: SensorSpec, res: float,
                          rng: np.random.Generator | None = None,
                          samples: PathSamples | None = None,
                          endpoint_mode: str = "exclude") -> PathGainResult:
    """Gain of the cells seen by the interior of ``path``.

    Interior and sampled view-point filters are merged cell by cell with a
    maximum.  With ``endpoint_mode="exclude"`` cells inside either endpoint's
    box are dropped from the footprint; ``"ignore"`` only keeps the endpoints
    from contributing filters.
    """
    poses = path.poses
    if len(poses) < 2:
        raise ValueError("a path needs at least two view-points")
    if samples is None:
        samples = draw_samples(poses, res, rng)
    extra = sampled_poses(poses, samples)
    union = FuzzyFilter()
    for xi in np.vstack([poses[1:-1], extra]):
        union.merge_max(build_view_filter(xi, spec, res, bd.shape))
    excluded = endpoint_exclusion(poses, spec, res, bd.shape, endpoint_mode)
    union.values = {k: v for k, v in union.values.items() if not excluded[k]}
    terms = [v * float(bd.values[k]) for k, v in sorted(union.values.items())]
    return PathGainResult(math.fsum(terms), union, extra, samples)
