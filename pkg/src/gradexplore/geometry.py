"""Poses, paths and grid traversal shared by every stage of the pipeline.

Grid convention: a map of shape ``(m, n)`` is indexed ``[i, j]`` with ``i``
along x and ``j`` along y.  Cell ``(i, j)`` covers
``[i*res, (i+1)*res) x [j*res, (j+1)*res)`` with the world origin at (0, 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(a):
    """Reduce angle(s) to the half-open interval (-pi, pi], without rounding error.

    ``fmod`` is exact and the single correction by 2*pi is exact as well
    (both operands lie within a factor of two of each other).
    """
    if isinstance(a, np.ndarray):
        w = np.fmod(a, TWO_PI)
        w = np.where(w > math.pi, w - TWO_PI, w)
        return np.where(w <= -math.pi, w + TWO_PI, w)
    w = math.fmod(a, TWO_PI)
    if w > math.pi:
        w -= TWO_PI
    elif w <= -math.pi:
        w += TWO_PI
    return w


class ViewPoint(NamedTuple):
    """Robot configuration (x, y, theta) in meters / radians."""

    x: float
    y: float
    theta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta], dtype=float)


@dataclass
class Path:
    """Ordered view-points; the first and last are the fixed endpoints."""

    poses: np.ndarray  # (k+1, 3)

    def __post_init__(self):
        self.poses = np.atleast_2d(np.asarray(self.poses, dtype=float))
        if self.poses.shape[1] != 3:
            raise ValueError(f"path poses must be (k, 3), got {self.poses.shape}")

    @classmethod
    def from_viewpoints(cls, vps) -> "Path":
        return cls(np.array([tuple(v) for v in vps], dtype=float))

    def __len__(self) -> int:
        return len(self.poses)

    def __getitem__(self, k) -> ViewPoint:
        return ViewPoint(*map(float, self.poses[k]))

    @property
    def start(self) -> ViewPoint:
        return self[0]

    @property
    def end(self) -> ViewPoint:
        return self[-1]

    @property
    def interior(self) -> np.ndarray:
        return self.poses[1:-1]

    def length(self) -> float:
        """Euclidean length of the (x, y) polyline."""
        return polyline_length(self.poses)

    def with_interior(self, interior: np.ndarray) -> "Path":
        poses = self.poses.copy()
        poses[1:-1] = interior
        return Path(poses)

    def to_csv(self) -> str:
        rows = ["x,y,theta"] + [f"{x!r},{y!r},{t!r}" for x, y, t in self.poses.tolist()]
        return "\n".join(rows) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "Path":
        rows = []
        for n, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#") or line.replace(" ", "") == "x,y,theta":
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValueError(f"line {n}: expected 'x,y,theta', got {line!r}")
            rows.append([float(p) for p in parts])
        if not rows:
            raise ValueError("path file holds no poses")
        return cls(np.array(rows))


def polyline_length(poses: np.ndarray) -> float:
    if len(poses) < 2:
        return 0.0
    d = np.diff(poses[:, :2], axis=0)
    return float(np.sum(np.sqrt(np.sum(d * d, axis=1))))


def world_to_cell(x: float, y: float, res: float) -> tuple[int, int]:
    return int(math.floor(x / res)), int(math.floor(y / res))


def cell_center(i, j, res: float):
    return (i + 0.5) * res, (j + 0.5) * res


def traverse(x0: float, y0: float, angle: float, max_dist: float, res: float,
             shape: tuple[int, int]) -> Iterator[tuple[int, int, float]]:
    """Walk the cells pierced by a ray, in order (Amanatides-Woo stepping).

    Yields ``(i, j, t_enter)`` where ``t_enter`` is the distance along the ray
    at which the ray enters the cell (0 for the starting cell).  Stops when
    the entry distance exceeds ``max_dist`` or the ray leaves the grid.
    """
    return traverse_dir(x0, y0, math.cos(angle), math.sin(angle), max_dist, res, shape)


def traverse_dir(x0: float, y0: float, dx: float, dy: float, max_dist: float, res: float,
                 shape: tuple[int, int]) -> Iterator[tuple[int, int, float]]:
    """Same as :func:`traverse` with an explicit unit direction (dx, dy)."""
    m, n = shape
    i, j = world_to_cell(x0, y0, res)

    if dx > 0:
        step_i, t_max_x, t_dx = 1, ((i + 1) * res - x0) / dx, res / dx
    elif dx < 0:
        step_i, t_max_x, t_dx = -1, (i * res - x0) / dx, -res / dx
    else:
        step_i, t_max_x, t_dx = 0, math.inf, math.inf
    if dy > 0:
        step_j, t_max_y, t_dy = 1, ((j + 1) * res - y0) / dy, res / dy
    elif dy < 0:
        step_j, t_max_y, t_dy = -1, (j * res - y0) / dy, -res / dy
    else:
        step_j, t_max_y, t_dy = 0, math.inf, math.inf

    t = 0.0
    while t <= max_dist and 0 <= i < m and 0 <= j < n:
        yield i, j, t
        if t_max_x < t_max_y:
            t = t_max_x
            i += step_i
            t_max_x += t_dx
        else:
            t = t_max_y
            j += step_j
            t_max_y += t_dy


def segment_cells(p: tuple[float, float], q: tuple[float, float], res: float,
                  shape: tuple[int, int]) -> list[tuple[int, int]]:
    """Every grid cell the closed segment p-q passes through.

    Cells outside the grid are reported as ``(-1, -1)`` so callers can treat
    leaving the map as a collision.
    """
    (x0, y0), (x1, y1) = p, q
    length = math.hypot(x1 - x0, y1 - y0)
    m, n = shape
    start = world_to_cell(x0, y0, res)
    if not (0 <= start[0] < m and 0 <= start[1] < n):
        return [(-1, -1)]
    if length == 0.0:
        return [start]
    dx, dy = (x1 - x0) / length, (y1 - y0) / length
    cells = [(i, j) for i, j, _ in traverse_dir(x0, y0, dx, dy, length, res, shape)]
    end = world_to_cell(x1, y1, res)
    if not (0 <= end[0] < m and 0 <= end[1] < n):
        cells.append((-1, -1))
    elif cells[-1] != end:
        # Rounding in the stepping can stop one cell short of the endpoint.
        cells.append(end)
    return cells
