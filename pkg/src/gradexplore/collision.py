"""Traversability checks against the belief map (only known-free cells pass)."""

from __future__ import annotations

import math

import numpy as np

from .geometry import segment_cells, world_to_cell
from .gridmap import LogOddsMap


def traversable_mask(odds: LogOddsMap, inflation: float = 0.0) -> np.ndarray:
    """Known-free cells, optionally shrunk by ``inflation`` meters around blockers."""
    free = odds.values < 0
    if inflation <= 0:
        return free
    r = int(math.ceil(inflation / odds.resolution))
    blocked = ~free
    grown = blocked.copy()
    m, n = blocked.shape
    for di in range(-r, r + 1):
        for dj in range(-r, r + 1):
            if di * di + dj * dj > r * r:
                continue
            src = blocked[max(-di, 0):m - max(di, 0), max(-dj, 0):n - max(dj, 0)]
            grown[max(di, 0):m - max(-di, 0), max(dj, 0):n - max(-dj, 0)] |= src
    return ~grown


def point_free(mask: np.ndarray, x: float, y: float, res: float) -> bool:
    i, j = world_to_cell(x, y, res)
    m, n = mask.shape
    return 0 <= i < m and 0 <= j < n and bool(mask[i, j])


def segment_free(mask: np.ndarray, p, q, res: float) -> bool:
    for i, j in segment_cells((p[0], p[1]), (q[0], q[1]), res, mask.shape):
        if i < 0 or not mask[i, j]:
            return False
    return True


def path_free(mask: np.ndarray, poses: np.ndarray, res: float) -> bool:
    if not all(point_free(mask, x, y, res) for x, y, _ in poses):
        return False
    return all(segment_free(mask, poses[k], poses[k + 1], res) for k in range(len(poses) - 1))
