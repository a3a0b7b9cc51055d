"""SVG figures for frame sets (matplotlib, Agg backend)."""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed salt and no date: identical inputs give identical SVG bytes
matplotlib.rcParams["svg.hashsalt"] = "morseval"
matplotlib.rcParams["svg.fonttype"] = "none"


def _svg(fig) -> str:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def _grid_shape(n, cols=None):
    cols = cols or min(n, 5)
    return int(np.ceil(n / cols)), cols


def profile_strip(s_values, x, values, title=None, marks=None) -> str:
    """Small multiples of 1D profiles, one panel per frame."""
    n = len(s_values)
    rows, cols = _grid_shape(n)
    fig, axes = plt.subplots(rows, cols, figsize=(2.4 * cols, 2.0 * rows),
                             sharex=True, sharey=True, squeeze=False)
    lo, hi = float(np.min(values)), float(np.max(values))
    for i, ax in enumerate(axes.flat):
        if i >= n:
            ax.axis("off")
            continue
        ax.plot(x, values[i], lw=1.2, color="#1f4e79")
        if i > 0:
            ax.plot(x, values[0], lw=0.6, ls="--", color="0.6")
        for xm in (marks or []):
            ax.axvline(xm, lw=0.4, color="0.8")
        ax.set_ylim(lo - 0.05 * (hi - lo + 1e-12), hi + 0.05 * (hi - lo + 1e-12))
        ax.set_title(f"s = {s_values[i]:.4g}", fontsize=8)
        ax.tick_params(labelsize=7)
    if title:
        fig.suptitle(title, fontsize=9)
    fig.tight_layout()
    return _svg(fig)


def contour_strip(s_values, pts, values, title=None, levels=15) -> str:
    """Small multiples of contour plots for 2D frames on a tensor grid."""
    xs, ys = np.unique(pts[:, 0]), np.unique(pts[:, 1])
    n = len(s_values)
    rows, cols = _grid_shape(n)
    fig, axes = plt.subplots(rows, cols, figsize=(2.4 * cols, 2.2 * rows),
                             sharex=True, sharey=True, squeeze=False)
    lv = np.linspace(float(np.min(values)), float(np.max(values)), levels)
    for i, ax in enumerate(axes.flat):
        if i >= n:
            ax.axis("off")
            continue
        Z = values[i].reshape(len(xs), len(ys)).T
        ax.contour(xs, ys, Z, levels=lv, linewidths=0.6, cmap="viridis")
        ax.set_title(f"s = {s_values[i]:.4g}", fontsize=8)
        ax.tick_params(labelsize=7)
    if title:
        fig.suptitle(title, fontsize=9)
    fig.tight_layout()
    return _svg(fig)


def frames_figure(s_values, pts, values, title=None, marks=None) -> str:
    if pts.shape[1] == 1:
        return profile_strip(s_values, pts[:, 0], values, title, marks)
    if pts.shape[1] == 2:
        return contour_strip(s_values, pts, values, title)
    # 3D: slice through the last coordinate's middle plane
    last = np.unique(pts[:, 2])
    mid = last[len(last) // 2]
    keep = pts[:, 2] == mid
    return contour_strip(s_values, pts[keep, :2], values[:, keep], title)


def curves(x, series: dict, title=None) -> str:
    """Several named curves on one set of axes."""
    fig, ax = plt.subplots(figsize=(5, 3))
    for name, y in series.items():
        ax.plot(x, y, lw=1.2, label=name)
    ax.legend(fontsize=8)
    ax.tick_params(labelsize=8)
    if title:
        ax.set_title(title, fontsize=9)
    fig.tight_layout()
    return _svg(fig)
