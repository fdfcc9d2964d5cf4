"""Matplotlib helpers that render rasters and tables to image files.

Everything draws on the Agg backend and writes straight to disk.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FIG_WIDTH = 4.0


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_raster(path, image, title=None, vmin=0.0, vmax=None, cmap="gray"):
    """Raster with row 0 at the top, as stored."""
    image = np.asarray(image, dtype=float)
    fig, ax = plt.subplots(figsize=(FIG_WIDTH, FIG_WIDTH))
    im = ax.imshow(image, cmap=cmap, vmin=vmin, vmax=vmax, interpolation="nearest")
    fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
    ax.set_xticks([])
    ax.set_yticks([])
    if title:
        ax.set_title(title)
    return _finish(fig, path)


def plot_measurements(path, values, title=None):
    """Measurement matrix with each pixel value printed when the grid is small."""
    values = np.asarray(values, dtype=float)
    fig, ax = plt.subplots(figsize=(FIG_WIDTH, FIG_WIDTH))
    ax.imshow(values, cmap="gray", vmin=0.0, vmax=1.0, interpolation="nearest")
    m = values.shape[0]
    if m <= 8:
        for i in range(m):
            for j in range(m):
                v = values[i, j]
                ax.text(j, i, f"{v:.3f}", ha="center", va="center",
                        color="black" if v > 0.5 else "white", fontsize=9)
    ax.set_xticks([])
    ax.set_yticks([])
    if title:
        ax.set_title(title)
    return _finish(fig, path)


def plot_history(path, history, ylabel="TV", every=1, logy=False):
    fig, ax = plt.subplots(figsize=(FIG_WIDTH * 1.5, FIG_WIDTH))
    x = np.arange(1, len(history) + 1) * every
    ax.plot(x, history, lw=1.2)
    ax.set_xlabel("iteration")
    ax.set_ylabel(ylabel)
    if logy:
        ax.set_yscale("log")
    ax.grid(alpha=0.3)
    return _finish(fig, path)


def plot_curve(path, x, ys: dict, xlabel, ylabel):
    """One line per entry of ``ys``."""
    fig, ax = plt.subplots(figsize=(FIG_WIDTH * 1.5, FIG_WIDTH))
    for label, y in ys.items():
        ax.plot(x, y, marker="o", ms=3, lw=1.2, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.3)
    ax.legend()
    return _finish(fig, path)


def plot_table(path, table, grid, title=None):
    """Threshold table over ``grid x grid`` as a heat map."""
    table = np.asarray(table, dtype=float)
    fig, ax = plt.subplots(figsize=(FIG_WIDTH, FIG_WIDTH))
    ext = (grid[0], grid[-1], grid[0], grid[-1])
    im = ax.imshow(table.T, origin="lower", extent=ext, vmin=0.0, vmax=1.0, cmap="viridis")
    fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
    ax.set_xlabel("a")
    ax.set_ylabel("b")
    if title:
        ax.set_title(title)
    return _finish(fig, path)
