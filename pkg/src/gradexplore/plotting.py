"""PNG renderings of runs, maps and filters (matplotlib, Agg backend)."""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _png(fig) -> bytes:
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=110, bbox_inches="tight")
    plt.close(fig)
    return buf.getvalue()


def coverage_curve(reports: dict) -> bytes:
    """Free-cell coverage against travelled distance, one line per labelled report."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, rep in reports.items():
        xs = [0.0] + [e.cumulative_length for e in rep.episodes]
        ys = [rep.initial["free_correct"]] + [e.coverage["free_correct"] for e in rep.episodes]
        ax.plot(xs, ys, marker=".", label=label)
    ax.set_xlabel("cumulative path length [m]")
    ax.set_ylabel("free cells mapped")
    ax.set_ylim(0, 1.02)
    ax.grid(alpha=0.3)
    ax.legend()
    return _png(fig)


def map_with_paths(odds, paths=(), title: str = "") -> bytes:
    res = odds.resolution
    m, n = odds.shape
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.imshow(odds.to_probability().T, origin="lower", cmap="gray_r", vmin=0, vmax=1,
              extent=(0, m * res, 0, n * res))
    colors = plt.cm.viridis(np.linspace(0, 1, max(len(paths), 1)))
    for c, p in zip(colors, paths):
        ax.plot(p.poses[:, 0], p.poses[:, 1], "-", color=c, lw=1.2)
        ax.plot(*p.poses[-1, :2], "o", color=c, ms=3)
    ax.set_title(title)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    return _png(fig)


def filter_image(dense: np.ndarray, res: float, pose=None) -> bytes:
    m, n = dense.shape
    fig, ax = plt.subplots(figsize=(5, 4.2))
    im = ax.imshow(dense.T, origin="lower", cmap="magma", vmin=0, vmax=1, extent=(0, m * res, 0, n * res))
    if pose is not None:
        x, y, th = pose
        ax.arrow(x, y, 0.4 * np.cos(th), 0.4 * np.sin(th), color="cyan", width=0.03)
    fig.colorbar(im, ax=ax, label="discount")
    return _png(fig)
