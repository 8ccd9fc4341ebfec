"""Smoothness-minus-information-gain objective and its gradient-descent solver."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .boundariness import BoundarinessMap
from .collision import path_free, point_free, segment_free, traversable_mask
from .geometry import Path, wrap_angle
from .gridmap import LogOddsMap
from .infogain import (PathSamples, draw_samples, endpoint_exclusion, half_width,
                       sampled_poses)
from .world import SensorSpec


class NumericalError(ArithmeticError):
    def __init__(self, message: str, vertex: int | None = None):
        super().__init__(message)
        self.vertex = vertex


class CollisionError(ValueError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    step_size: float = 0.05
    max_iterations: int = 100
    tolerance: float = 1e-4
    shrink: float = 0.5
    collision_check: bool = True
    min_step: float = 1e-6  # stop once every per-vertex step falls below this

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")


@dataclass
class Evaluation:
    f: float
    smoothness: float
    gain: float
    grad: np.ndarray | None = None


class Objective:
    """f(interior) = alpha * sum ||xi_i - xi_{i-1}||_W^2 - IG_path.

    The endpoints, the boundariness snapshot, the interpolation samples and
    the endpoint exclusion are frozen at construction.
    """

    def __init__(self, start, end, n_interior: int, bd: BoundarinessMap, spec: SensorSpec,
                 res: float, samples: PathSamples | None = None, alpha: float = 0.1,
                 weights=(1.0, 1.0, 0.1), endpoint_mode: str = "exclude"):
        self.start = np.asarray(start, dtype=float).copy()
        self.end = np.asarray(end, dtype=float).copy()
        self.n_interior = int(n_interior)
        self.bd = bd
        self.spec = spec
        self.res = float(res)
        self.samples = samples if samples is not None else PathSamples.empty()
        self.alpha = float(alpha)
        self.weights = np.asarray(weights, dtype=float)
        if self.weights.shape != (3,) or np.any(self.weights <= 0):
            raise ValueError("W must be a positive diagonal of length 3")
        self.endpoint_mode = endpoint_mode
        self.h = half_width(spec, res)
        ends = np.vstack([self.start, self.end])
        excluded = endpoint_exclusion(ends, spec, res, bd.shape, endpoint_mode)
        active = (bd.values > 0) & ~excluded
        self.cells_i, self.cells_j = np.nonzero(active)
        self.cells_bd = bd.values[self.cells_i, self.cells_j]
        self.cells_x = (self.cells_i + 0.5) * res
        self.cells_y = (self.cells_j + 0.5) * res

    @classmethod
    def for_path(cls, path: Path, bd: BoundarinessMap, spec: SensorSpec, res: float,
                 rng: np.random.Generator | None = None, **kw) -> "Objective":
        samples = draw_samples(path.poses, res, rng)
        return cls(path.poses[0], path.poses[-1], len(path) - 2, bd, spec, res, samples, **kw)

    def poses(self, interior: np.ndarray) -> np.ndarray:
        return np.vstack([self.start, np.reshape(interior, (-1, 3)), self.end])

    def viewpoints(self, interior: np.ndarray) -> np.ndarray:
        poses = self.poses(interior)
        return np.vstack([poses[1:-1], sampled_poses(poses, self.samples)])

    # -- graph construction -------------------------------------------------

    def _record(self, tape: ad.Tape, X: ad.Node):
        P = ad.concat([self.start[None, :], X, self.end[None, :]], axis=0)
        D = P[1:] - P[:-1]
        dth = ad.wrap(D[:, 2])
        w = self.weights
        smooth = self.alpha * ad.sum(w[0] * ad.square(D[:, 0]) + w[1] * ad.square(D[:, 1])
                                     + w[2] * ad.square(dth))

        views = [X] if self.n_interior else []
        if len(self.samples):
            a, b = P[self.samples.seg], P[self.samples.seg + 1]
            t = self.samples.t
            sx = a[:, 0] + t * (b[:, 0] - a[:, 0])
            sy = a[:, 1] + t * (b[:, 1] - a[:, 1])
            sth = a[:, 2] + t * ad.wrap(b[:, 2] - a[:, 2])
            views.append(ad.stack([sx, sy, sth], axis=1))
        if not views or len(self.cells_bd) == 0:
            return smooth, smooth * 0.0
        V = views[0] if len(views) == 1 else ad.concat(views, axis=0)

        vx, vy = V.value[:, 0], V.value[:, 1]
        ci = np.floor(vx / self.res).astype(int)[:, None]
        cj = np.floor(vy / self.res).astype(int)[:, None]
        I, J = self.cells_i[None, :], self.cells_j[None, :]
        inbox = (np.abs(I - ci) <= 2 * self.h) & (np.abs(J - cj) <= 2 * self.h)
        cols = np.nonzero(inbox.any(axis=0))[0]
        if len(cols) == 0:
            return smooth, smooth * 0.0
        inbox = inbox[:, cols]
        own = (I[:, cols] == ci) & (J[:, cols] == cj)

        r_max = self.spec.max_range
        c = math.cos(self.spec.fov / 2)
        dx = self.cells_x[None, cols] - V[:, 0:1]
        dy = self.cells_y[None, cols] - V[:, 1:2]
        dist = ad.sqrt(ad.square(dx) + ad.square(dy))
        dv = dist.value
        phi_d = ad.where(dv < r_max, np.ones_like(dv),
                         ad.where(dv <= 2 * r_max, (2 * r_max - dist) / r_max, np.zeros_like(dv)))
        safe = ad.where(dv > 0, dist, np.ones_like(dv))
        uv = (ad.cos(V[:, 2:3]) * dx + ad.sin(V[:, 2:3]) * dy) / safe
        plateau = own | (dv == 0) | (uv.value >= c)
        phi_t = ad.where(plateau, np.ones_like(dv), (1.0 + uv) / (1.0 + c))
        phi = ad.where(inbox, phi_d * phi_t, np.zeros_like(dv))
        union = ad.amax(phi, axis=0)
        gain = ad.sum(union * self.cells_bd[cols])
        return smooth, gain

    def evaluate(self, interior: np.ndarray, grad: bool = False) -> Evaluation:
        interior = np.reshape(np.asarray(interior, dtype=float), (self.n_interior, 3))
        if not np.isfinite(interior).all():
            raise NumericalError("non-finite view-point coordinates", self._bad_vertex(interior))
        tape = ad.Tape()
        X = tape.variable(interior)
        smooth, gain = self._record(tape, X)
        f = smooth - gain
        ev = Evaluation(float(f.value), float(smooth.value), float(gain.value))
        if not math.isfinite(ev.f):
            raise NumericalError("objective is not finite", self._bad_vertex(interior))
        if grad:
            (g,) = tape.gradient(f, [X])
            bad = ~np.isfinite(g).all(axis=1)
            if bad.any():
                v = int(np.argmax(bad))
                raise NumericalError(f"non-finite gradient at interior vertex {v}", v)
            ev.grad = g
        return ev

    def __call__(self, interior: np.ndarray) -> float:
        return self.evaluate(interior).f

    def gradient(self, interior: np.ndarray) -> np.ndarray:
        return self.evaluate(interior, grad=True).grad

    def _bad_vertex(self, interior: np.ndarray) -> int | None:
        bad = ~np.isfinite(interior).all(axis=1)
        return int(np.argmax(bad)) if bad.any() else None

    def branch_margin(self, interior: np.ndarray) -> float:
        """Smallest distance from any active piecewise kink.

        Covers the distance ramp ends, the field-of-view edge (in cosine
        units), the arg-max of the union, cell-boundary crossings of the
        view-points and the angle wrap.  Only cells with non-zero
        boundariness are considered since the others cannot affect f.
        """
        poses = self.poses(interior)
        margins = [np.inf]
        dth = np.diff(poses[:, 2])
        margins.append(np.min(np.abs(np.abs(wrap_angle(dth)) - math.pi), initial=np.inf))
        if len(self.samples):
            d = poses[self.samples.seg + 1, 2] - poses[self.samples.seg, 2]
            margins.append(np.min(np.abs(np.abs(wrap_angle(d)) - math.pi)))
        V = self.viewpoints(interior)
        if len(V) == 0 or len(self.cells_bd) == 0:
            return float(min(margins))
        frac = np.concatenate([V[:, 0] / self.res, V[:, 1] / self.res])
        margins.append(np.min(np.abs(frac - np.round(frac))) * self.res)
        r_max = self.spec.max_range
        c = math.cos(self.spec.fov / 2)
        dx = self.cells_x[None, :] - V[:, 0:1]
        dy = self.cells_y[None, :] - V[:, 1:2]
        dist = np.sqrt(dx * dx + dy * dy)
        ci = np.floor(V[:, 0:1] / self.res)
        cj = np.floor(V[:, 1:2] / self.res)
        inbox = (np.abs(self.cells_i[None, :] - ci) <= 2 * self.h) & (np.abs(self.cells_j[None, :] - cj) <= 2 * self.h)
        own = (self.cells_i[None, :] == ci) & (self.cells_j[None, :] == cj)
        live = inbox & (dist <= 2 * r_max + 1e-2)
        if live.any():
            margins.append(np.min(np.abs(dist[live] - r_max)))
            margins.append(np.min(np.abs(dist[live] - 2 * r_max)))
            with np.errstate(invalid="ignore", divide="ignore"):
                uv = (np.cos(V[:, 2:3]) * dx + np.sin(V[:, 2:3]) * dy) / dist
            edge = live & ~own
            if edge.any():
                margins.append(np.min(np.abs(uv[edge] - c)))
        phi_d = np.where(dist < r_max, 1.0, np.where(dist <= 2 * r_max, (2 * r_max - dist) / r_max, 0.0))
        with np.errstate(invalid="ignore", divide="ignore"):
            uv = (np.cos(V[:, 2:3]) * dx + np.sin(V[:, 2:3]) * dy) / dist
        phi_t = np.where(own | (uv >= c), 1.0, (1.0 + uv) / (1.0 + c))
        phi = np.where(inbox, phi_d * phi_t, 0.0)
        if len(V) > 1:
            top2 = -np.sort(-phi, axis=0)[:2]
            gap = top2[0] - top2[1]
            # exact ties on a flat plateau (both 1 or both 0) are harmless
            tie_flat = (gap == 0) & ((top2[0] == 1.0) | (top2[0] == 0.0))
            contested = ~tie_flat
            if contested.any():
                margins.append(np.min(gap[contested]))
        return float(min(margins))


def finite_difference_gradient(obj: Objective, interior: np.ndarray, step: float = 1e-6) -> np.ndarray:
    interior = np.asarray(interior, dtype=float)
    g = np.zeros_like(interior)
    for idx in np.ndindex(interior.shape):
        hi = interior.copy()
        lo = interior.copy()
        hi[idx] += step
        lo[idx] -= step
        g[idx] = (obj(hi) - obj(lo)) / (2 * step)
    return g


def relative_error(g: np.ndarray, ref: np.ndarray) -> float:
    """Max component error relative to the gradient scale ``max(|ref|_inf, 1)``."""
    if g.size == 0:
        return 0.0
    return float(np.max(np.abs(g - ref)) / max(np.max(np.abs(ref)), 1.0))


@dataclass
class TraceRow:
    iteration: int
    f: float
    smoothness: float
    gain: float
    accepted: int
    rejected: int


@dataclass
class OptimizationResult:
    path: Path
    initial: Evaluation
    final: Evaluation
    trace: list[TraceRow] = field(default_factory=list)

    @property
    def accepted_values(self) -> list[float]:
        return [r.f for r in self.trace if r.iteration == 0 or r.accepted > 0]

    def trace_csv(self) -> str:
        buf = io.StringIO()
        buf.write("iteration,f,smoothness,gain,accepted,rejected\n")
        for r in self.trace:
            buf.write(f"{r.iteration},{r.f!r},{r.smoothness!r},{r.gain!r},{r.accepted},{r.rejected}\n")
        return buf.getvalue()


def optimize_path(path: Path, objective: Objective, config: OptimizerConfig = OptimizerConfig(),
                  odds: LogOddsMap | None = None, inflation: float = 0.0) -> OptimizationResult:
    """Gradient descent on the interior view-points with reject-and-shrink steps.

    A vertex whose move would put it, or one of its incident segments, on a
    cell that is not known-free keeps its old position and halves its own
    step size.  A step that raises f is undone and every moved vertex halves
    its step size, so accepted values never increase.
    """
    res = objective.res
    check = config.collision_check and odds is not None
    mask = traversable_mask(odds, inflation) if check else None
    poses = path.poses.copy()
    if check and not path_free(mask, poses, res):
        raise CollisionError("input path is not inside known-free space")

    X = poses[1:-1].copy()
    cur = objective.evaluate(X, grad=True)
    initial = Evaluation(cur.f, cur.smoothness, cur.gain)
    trace = [TraceRow(0, cur.f, cur.smoothness, cur.gain, 0, 0)]
    if len(X) == 0:
        return OptimizationResult(Path(poses), initial, initial, trace)

    eta = np.full(len(X), config.step_size)
    for it in range(1, config.max_iterations + 1):
        prop = X - eta[:, None] * cur.grad
        moved = np.any(prop != X, axis=1)
        rejected = 0
        if check and moved.any():
            while True:
                bad = _colliding_vertices(mask, objective.poses(prop), moved, res)
                if not bad:
                    break
                bad = np.array(sorted(bad))
                prop[bad] = X[bad]
                eta[bad] *= config.shrink
                moved[bad] = False
                rejected += len(bad)
        if not moved.any():
            trace.append(TraceRow(it, cur.f, cur.smoothness, cur.gain, 0, rejected))
            if np.all(eta < config.min_step) or not np.any(cur.grad):
                break
            continue
        new = objective.evaluate(prop, grad=True)
        if new.f > cur.f:
            eta[moved] *= config.shrink
            trace.append(TraceRow(it, cur.f, cur.smoothness, cur.gain, 0, rejected + int(moved.sum())))
            if np.all(eta < config.min_step):
                break
            continue
        delta = cur.f - new.f
        X, cur = prop, new
        trace.append(TraceRow(it, cur.f, cur.smoothness, cur.gain, int(moved.sum()), rejected))
        if delta < config.tolerance:
            break
    out = poses.copy()
    out[1:-1] = X
    return OptimizationResult(Path(out), initial, Evaluation(cur.f, cur.smoothness, cur.gain), trace)


def _colliding_vertices(mask, poses, moved, res) -> set[int]:
    """Interior indices (0-based) of moved vertices involved in a collision."""
    bad: set[int] = set()
    k = len(poses) - 1
    for v in np.nonzero(moved)[0]:
        p = poses[v + 1]
        if not point_free(mask, p[0], p[1], res):
            bad.add(int(v))
    for s in range(k):
        a, b = s - 1, s  # interior indices of the segment's endpoints
        touches = (0 <= a < len(moved) and moved[a]) or (0 <= b < len(moved) and moved[b])
        if not touches:
            continue
        if not segment_free(mask, poses[s], poses[s + 1], res):
            for v in (a, b):
                if 0 <= v < len(moved) and moved[v]:
                    bad.add(v)
    return bad
