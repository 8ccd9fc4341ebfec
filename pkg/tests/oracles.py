"""Independent dense reference computations used by several test modules."""

import math

import numpy as np


def dense_discount(xi, spec, res, shape):
    """Full-map filter of one view-point, one cell at a time with scalar math."""
    x, y, th = (float(v) for v in xi)
    h = int(math.ceil(spec.max_range / res - 1e-9))
    ci, cj = math.floor(x / res), math.floor(y / res)
    ux, uy = math.cos(th), math.sin(th)
    c = math.cos(spec.fov / 2)
    r = spec.max_range
    out = np.zeros(shape)
    inbox = np.zeros(shape, dtype=bool)
    for i in range(shape[0]):
        for j in range(shape[1]):
            if abs(i - ci) > 2 * h or abs(j - cj) > 2 * h:
                continue
            inbox[i, j] = True
            dx = (i + 0.5) * res - x
            dy = (j + 0.5) * res - y
            d = math.sqrt(dx * dx + dy * dy)
            phi_d = 1.0 if d < r else ((2 * r - d) / r if d <= 2 * r else 0.0)
            if (i, j) == (ci, cj) or d == 0:
                phi_t = 1.0
            else:
                uv = (ux * dx + uy * dy) / d
                phi_t = 1.0 if uv >= c else (1.0 + uv) / (1.0 + c)
            out[i, j] = phi_d * phi_t
    return out, inbox


def interpolate(poses, seg, t):
    out = []
    for s, u in zip(seg, t):
        a, b = poses[s], poses[s + 1]
        d = math.remainder(b[2] - a[2], 2 * math.pi)
        if d == -math.pi:
            d = math.pi
        out.append((a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1]), a[2] + u * d))
    return out


def dense_path_gain(poses, seg, t, bd_values, spec, res, exclude_endpoints=True):
    """Brute-force path gain: dense per-view maps, elementwise max, row-major fsum."""
    shape = bd_values.shape
    views = [tuple(p) for p in poses[1:-1]] + interpolate(poses, seg, t)
    union = np.zeros(shape)
    covered = np.zeros(shape, dtype=bool)
    for xi in views:
        phi, inbox = dense_discount(xi, spec, res, shape)
        union = np.where(inbox & (~covered | (phi > union)), phi, union)
        covered |= inbox
    if exclude_endpoints:
        for xi in (poses[0], poses[-1]):
            _, inbox = dense_discount(xi, spec, res, shape)
            covered &= ~inbox
    terms = [union[i, j] * bd_values[i, j] for i in range(shape[0]) for j in range(shape[1]) if covered[i, j]]
    return math.fsum(terms)
