"""Figure rendering for CLI reports. Uses the non-interactive Agg backend.

Every function writes one PNG next to the delimited outputs and returns the
path. Raster panels are restricted to d=2 instances; graph and grid panels
work for any dimension.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import landscape as ls
from .analysis import GRID_BINS, CorrelationRow, CoverageGrid
from .errors import CapabilityError
from .lon import FEATURE_COLUMNS, Lon

DPI = 130


def _require_2d(instance, what: str):
    if instance.dim != 2:
        raise CapabilityError(f"{what} rasters are only rendered for d=2 instances")


def _grid(instance, resolution: int):
    axis = np.linspace(0.0, 1.0, resolution)
    xx, yy = np.meshgrid(axis, axis)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    return axis, pts


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def landscape_figure(instance, path, resolution: int = 250) -> Path:
    """Objective heat map with centers and local optima marked (d=2)."""
    _require_2d(instance, "landscape")
    _, pts = _grid(instance, resolution)
    values, _ = ls.evaluate_batch(instance, pts)
    optima = ls.enumerate_local_optima(instance)

    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(values.reshape(resolution, resolution), origin="lower",
                   extent=(0, 1, 0, 1), cmap="viridis")
    fig.colorbar(im, ax=ax, label="f")
    ax.plot(instance.centers[:, 0], instance.centers[:, 1], ".", color="white",
            markersize=3, alpha=0.6)
    opt = np.asarray(optima.indices)
    ax.plot(instance.centers[opt, 0], instance.centers[opt, 1], "o",
            markerfacecolor="none", markeredgecolor="red", markersize=7)
    g = optima.global_index
    ax.plot(instance.centers[g, 0], instance.centers[g, 1], "*", color="red", markersize=14)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_title(f"m={instance.m}, {len(optima.indices)} local optima")
    return _save(fig, path)


def basin_figure(instance, path, resolution: int = 250,
                 disagreements: np.ndarray | None = None) -> Path:
    """Basin ownership raster (d=2), optionally with disagreement points overlaid."""
    from . import lon as lon_mod

    _require_2d(instance, "basin")
    _, pts = _grid(instance, resolution)
    basins = lon_mod.build_basins(instance)
    owner = lon_mod.assign_points(instance, basins, pts)
    # recolor by optimum rank so adjacent basins get distinct colors
    rank = {node: k for k, node in enumerate(basins.optima.indices)}
    colored = np.vectorize(rank.get)(owner).reshape(resolution, resolution)

    fig, ax = plt.subplots(figsize=(6, 5))
    ax.imshow(colored, origin="lower", extent=(0, 1, 0, 1), cmap="tab20",
              interpolation="nearest")
    opt = np.asarray(basins.optima.indices)
    ax.plot(instance.centers[opt, 0], instance.centers[opt, 1], "k^", markersize=6)
    if disagreements is not None and len(disagreements):
        ax.plot(disagreements[:, 0], disagreements[:, 1], "rx", markersize=3, alpha=0.7)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_title(f"{len(opt)} basins" + ("" if disagreements is None
                                         else f", {len(disagreements)} disagreements"))
    return _save(fig, path)


def lon_figure(lon: Lon, path) -> Path:
    """Node-and-edge drawing of a LON using the optima's first two coordinates."""
    fig, ax = plt.subplots(figsize=(6, 5))
    xs = lon.coords[:, 0]
    ys = lon.coords[:, 1] if lon.coords.shape[1] > 1 else np.zeros_like(xs)
    pos = {node: (xs[k], ys[k]) for k, node in enumerate(lon.nodes)}
    for (src, dst), w in sorted(lon.edges.items()):
        x0, y0 = pos[src]
        x1, y1 = pos[dst]
        ax.annotate("", xy=(x1, y1), xytext=(x0, y0),
                    arrowprops=dict(arrowstyle="-|>", color="gray",
                                    alpha=min(1.0, 0.15 + w), lw=0.8 + 2.5 * w))
    size = 40 + 260 * (lon.f_values - lon.f_values.min()) / max(
        float(lon.f_values.max() - lon.f_values.min()), 1e-12)
    ax.scatter(xs, ys, s=size, c=lon.f_values, cmap="viridis", zorder=3,
               edgecolors="black", linewidths=0.5)
    gk = lon.nodes.index(lon.global_index)
    ax.scatter([xs[gk]], [ys[gk]], s=size[gk] + 120, facecolors="none",
               edgecolors="red", linewidths=1.5, zorder=4)
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.set_title(f"{lon.kind} LON: {lon.num_nodes} nodes, {len(lon.edges)} edges")
    return _save(fig, path)


def coverage_figure(grid: CoverageGrid, path) -> Path:
    """Occupancy map of the feature grid (dark cells are occupied)."""
    fig, ax = plt.subplots(figsize=(5.5, 5))
    ax.imshow((grid.bins > 0).T, origin="lower", cmap="Greys",
              extent=(1, grid.m, 0, 1), aspect="auto", interpolation="nearest")
    ax.set_xlabel("num_nodes")
    ax.set_ylabel("global_funnel_size")
    ax.set_title(f"coverage = {grid.coverage:.3f} "
                 f"({int(np.count_nonzero(grid.bins))}/{GRID_BINS * GRID_BINS} cells)")
    return _save(fig, path)


def success_heatmap_figure(medians: np.ndarray, m: int, path,
                           label: str = "median success_rate") -> Path:
    """Per-cell median performance over the feature grid; empty cells blank."""
    fig, ax = plt.subplots(figsize=(6, 5))
    masked = np.ma.masked_invalid(medians.T)
    im = ax.imshow(masked, origin="lower", cmap="RdYlGn", extent=(1, m, 0, 1),
                   aspect="auto", interpolation="nearest", vmin=0.0, vmax=1.0)
    fig.colorbar(im, ax=ax, label=label)
    ax.set_xlabel("num_nodes")
    ax.set_ylabel("global_funnel_size")
    return _save(fig, path)


def correlation_figure(table: list[CorrelationRow], path,
                       metric: str = "success_rate") -> Path:
    """Grouped bar chart of feature-performance rank correlations."""
    algorithms = sorted({row.algorithm for row in table})
    fig, ax = plt.subplots(figsize=(9, 4.5))
    width = 0.8 / max(len(algorithms), 1)
    base = np.arange(len(FEATURE_COLUMNS), dtype=float)
    for k, algorithm in enumerate(algorithms):
        by_feature = {row.feature: row.rho for row in table
                      if row.algorithm == algorithm and row.metric == metric}
        heights = [by_feature.get(f) if by_feature.get(f) is not None else 0.0
                   for f in FEATURE_COLUMNS]
        ax.bar(base + k * width, heights, width=width, label=algorithm)
    ax.axhline(0.0, color="black", lw=0.8)
    ax.set_xticks(base + 0.4 - width / 2)
    ax.set_xticklabels(FEATURE_COLUMNS, rotation=30, ha="right")
    ax.set_ylabel(f"Spearman rho vs {metric}")
    ax.set_ylim(-1, 1)
    ax.legend()
    return _save(fig, path)
