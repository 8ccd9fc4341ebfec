"""Log-odds occupancy grid fused with a clamped binary Bayes filter."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .geometry import traverse
from .world import Scan, SensorSpec, encode_pgm, grid_to_image

L_MAX = math.log(0.9 / 0.1)
L_MIN = math.log(0.3 / 0.7)


class OutOfBeamError(ValueError):
    pass


@dataclass(frozen=True)
class InverseSensorModel:
    """Moravec-Elfes style range/angle occupancy profile.

    Evidence is free (probability below one half) before the return and
    occupied inside the ``+-eps`` band around it.
    """

    spec: SensorSpec

    def range_term(self, delta: float, measured_range: float) -> float:
        eps = self.spec.range_noise_eps
        near = measured_range - eps
        if delta <= near:
            return 1.0 - (delta / near) ** 2 if near > 0 else 0.0
        if delta <= measured_range + eps:
            return ((delta - measured_range) / eps) ** 2 - 1.0
        return 0.0

    def angle_term(self, theta: float) -> float:
        half = self.spec.beam_aperture / 2
        if abs(theta) > half * (1 + 1e-12):
            raise OutOfBeamError(f"|theta|={abs(theta):.6g} exceeds half aperture {half:.6g}")
        return 1.0 - (theta / half) ** 2

    def probability(self, delta: float, theta: float, measured_range: float) -> float:
        if delta < 0:
            raise ValueError("delta must be non-negative")
        o_a = self.angle_term(theta)
        if delta > measured_range + self.spec.range_noise_eps:
            return 0.5
        return (1.0 - self.range_term(delta, measured_range) * o_a) / 2.0


def occupancy_probability(model: InverseSensorModel, delta: float, theta: float,
                          measured_range: float) -> float:
    return model.probability(delta, theta, measured_range)


def _logit(p: float) -> float:
    if p <= 0.0:
        return -math.inf
    if p >= 1.0:
        return math.inf
    return math.log(p / (1.0 - p))


class LogOddsMap:
    """Grid of clamped log-odds; 0 unknown, negative free, positive occupied."""

    def __init__(self, width: int, height: int, resolution: float,
                 l_min: float = L_MIN, l_max: float = L_MAX, values: np.ndarray | None = None):
        if not l_min < 0 < l_max:
            raise ValueError("need l_min < 0 < l_max")
        if resolution <= 0:
            raise ValueError("resolution must be positive")
        self.resolution = float(resolution)
        self.l_min, self.l_max = float(l_min), float(l_max)
        if values is None:
            values = np.zeros((width, height))
        values = np.array(values, dtype=float)
        if values.shape != (width, height):
            raise ValueError(f"values shape {values.shape} != {(width, height)}")
        self.values = np.clip(values, self.l_min, self.l_max)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def width(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    def copy(self) -> "LogOddsMap":
        return LogOddsMap(self.width, self.height, self.resolution, self.l_min, self.l_max, self.values)

    @classmethod
    def from_probability(cls, prob: np.ndarray, resolution: float, **kw) -> "LogOddsMap":
        prob = np.asarray(prob, dtype=float)
        with np.errstate(divide="ignore"):
            vals = np.log(prob / (1.0 - prob))
        return cls(prob.shape[0], prob.shape[1], resolution, values=vals, **kw)

    def free_mask(self) -> np.ndarray:
        return self.values < 0

    def occupied_mask(self) -> np.ndarray:
        return self.values > 0

    def unknown_mask(self) -> np.ndarray:
        return self.values == 0

    def increments(self, scan: Scan, model: InverseSensorModel) -> dict[tuple[int, int], float]:
        """Per-cell sum of the log-odds evidence carried by one scan (unclamped).

        Cells are enumerated along each beam axis by grid stepping; a cell's
        distance is where the beam enters it, and being on the axis it takes
        the full angular weight.  With cells wider than the noise band the
        occupied evidence of a return is given to the single cell holding the
        return point (evaluated at the return itself); cells the beam crosses
        before it only take free evidence and cells behind it are shadowed.
        Each single-beam increment saturates at ``+-(l_max - l_min)``, the
        largest step that can matter after the clamp, which keeps opposite
        infinite evidence from producing NaN.
        """
        x, y, theta = scan.origin
        eps = model.spec.range_noise_eps
        r_max = model.spec.max_range
        cap = self.l_max - self.l_min
        acc: dict[tuple[int, int], float] = {}

        def add(cell, p):
            inc = min(max(_logit(p), -cap), cap)
            acc[cell] = acc.get(cell, 0.0) + inc

        for beam in scan.beams:
            r = beam.range if beam.hit else r_max
            # no return: free evidence only, up to the start of the band
            reach = r + 2 * self.resolution if beam.hit else r_max - eps
            cells = list(traverse(x, y, theta + beam.bearing, reach, self.resolution, self.shape))
            for q, (i, j, t) in enumerate(cells):
                if beam.hit:
                    t_next = cells[q + 1][2] if q + 1 < len(cells) else math.inf
                    if t_next > r:
                        add((i, j), model.probability(r, 0.0, r))
                        break
                p = model.probability(t, 0.0, r)
                if p < 0.5:
                    add((i, j), p)
        return acc

    def update_with_scan(self, scan: Scan, model: InverseSensorModel) -> list[tuple[int, int]]:
        """Fuse a scan in place; returns the cells that received evidence."""
        acc = self.increments(scan, model)
        if not acc:
            return []
        cells = list(acc)
        idx = tuple(np.array(cells).T)
        inc = np.fromiter(acc.values(), dtype=float, count=len(acc))
        self.values[idx] = np.minimum(np.maximum(self.values[idx] + inc, self.l_min), self.l_max)
        return cells

    def to_probability(self) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.values))

    def to_pgm(self) -> bytes:
        """Occupancy probability x 255, top row = max y."""
        img = np.round(self.to_probability() * 255.0)
        return encode_pgm(grid_to_image(img), (f"resolution {self.resolution!r}",))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# resolution {self.resolution!r} l_min {self.l_min!r} l_max {self.l_max!r}\n")
        np.savetxt(buf, self.values, delimiter=",", fmt="%.17g")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "LogOddsMap":
        lines = text.splitlines()
        head = lines[0].lstrip("#").split()
        meta = dict(zip(head[::2], map(float, head[1::2])))
        vals = np.loadtxt(io.StringIO("\n".join(lines[1:])), delimiter=",", ndmin=2)
        return cls(vals.shape[0], vals.shape[1], meta["resolution"],
                   meta.get("l_min", L_MIN), meta.get("l_max", L_MAX), vals)


def update_with_scan(odds: LogOddsMap, scan: Scan, model: InverseSensorModel) -> LogOddsMap:
    odds.update_with_scan(scan, model)
    return odds


def to_probability_map(odds: LogOddsMap) -> np.ndarray:
    return odds.to_probability()
