"""Continuous frontier score per cell from the 3x3 log-odds neighbourhood."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gridmap import LogOddsMap
from .world import encode_pgm, grid_to_image

# fixed summation order over the 8-neighbourhood
NEIGHBOURS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


@dataclass(frozen=True)
class BoundarinessParams:
    weight: float = 0.8
    sigma: float = 0.3
    # a diagonal free neighbour behind two occupied orthogonal cells cannot see the cell
    corner_occlusion: bool = True

    def __post_init__(self):
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError("weight must lie in [0, 1]")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


@dataclass
class BoundarinessMap:
    values: np.ndarray
    params: BoundarinessParams = field(default_factory=BoundarinessParams)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def copy(self) -> "BoundarinessMap":
        return BoundarinessMap(self.values.copy(), self.params)

    def count_above(self, threshold: float) -> int:
        return int(np.count_nonzero(self.values > threshold))

    def to_pgm(self) -> bytes:
        # darker = more boundary-like
        img = 255.0 - np.round(self.values * 255.0)
        return encode_pgm(grid_to_image(img))


def _window(values: np.ndarray, i0: int, i1: int, j0: int, j1: int,
            params: BoundarinessParams) -> np.ndarray:
    """Scores for cells [i0, i1) x [j0, j1), reading neighbours from ``values``."""
    m, n = values.shape
    pad = np.zeros((m + 2, n + 2))
    pad[1:-1, 1:-1] = values
    inside = np.zeros((m + 2, n + 2), dtype=bool)
    inside[1:-1, 1:-1] = True

    center = values[i0:i1, j0:j1]
    shape = center.shape
    p = np.zeros(shape)
    count = np.zeros(shape, dtype=int)
    known = np.zeros(shape, dtype=int)
    free = np.zeros(shape, dtype=int)

    def shifted(di, dj):
        return pad[i0 + 1 + di:i1 + 1 + di, j0 + 1 + dj:j1 + 1 + dj]

    for di, dj in NEIGHBOURS:
        nb = shifted(di, dj)
        p = p + nb
        count += inside[i0 + 1 + di:i1 + 1 + di, j0 + 1 + dj:j1 + 1 + dj]
        known += nb != 0
        open_ = nb < 0
        if params.corner_occlusion and di and dj:
            open_ &= ~((shifted(di, 0) > 0) & (shifted(0, dj) > 0))
        free += open_

    w, s2 = params.weight, params.sigma ** 2
    with np.errstate(invalid="ignore"):  # 0/0 only where a 1-cell map has no neighbours
        score = (w * np.exp(-center ** 2 / (2 * s2))
                 + (1 - w) * np.exp(-p ** 2 / (2 * count.astype(float) ** 2 * s2)))
    # all neighbours unknown, or no known neighbour is a free cell with a line of sight
    score[(known == 0) | (free == 0)] = 0.0
    return score


def cell_boundariness(odds: LogOddsMap, i0: int, j0: int,
                      params: BoundarinessParams = BoundarinessParams()) -> float:
    m, n = odds.shape
    if not (0 <= i0 < m and 0 <= j0 < n):
        raise IndexError(f"cell ({i0}, {j0}) outside a {m}x{n} map")
    return float(_window(odds.values, i0, i0 + 1, j0, j0 + 1, params)[0, 0])


def compute_boundariness_map(odds: LogOddsMap,
                             params: BoundarinessParams = BoundarinessParams()) -> BoundarinessMap:
    m, n = odds.shape
    return BoundarinessMap(_window(odds.values, 0, m, 0, n, params), params)


def refresh_boundariness(bd: BoundarinessMap, odds: LogOddsMap, cells) -> None:
    """Recompute ``bd`` in place around changed log-odds ``cells``.

    A score depends only on its 3x3 neighbourhood, so refreshing the bounding
    box of the changed cells grown by one gives the full recomputation.
    """
    if not cells:
        return
    arr = np.asarray(cells)
    m, n = odds.shape
    i0, j0 = np.maximum(arr.min(axis=0) - 1, 0)
    i1, j1 = np.minimum(arr.max(axis=0) + 2, (m, n))
    bd.values[i0:i1, j0:j1] = _window(odds.values, int(i0), int(i1), int(j0), int(j1), bd.params)
