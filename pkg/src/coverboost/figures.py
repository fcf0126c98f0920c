"""Matplotlib rendering of coverage heatmaps, trajectories, and comparisons.

Figures are written to files next to the delimited outputs; rendering uses
the Agg backend so runs work headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Polygon as MplPolygon

from .geometry import MissionSpace
from .objective import Heatmap
from .optimizer import ProcessState
from .sensing import Fleet


def save_heatmap(space: MissionSpace, heatmap: Heatmap, fleet: Fleet,
                 path: str | Path, title: str | None = None) -> None:
    """Joint detection probability field with obstacles and numbered nodes."""
    fig, ax = plt.subplots(figsize=(6, 6))
    grid = heatmap.grid
    xmin, ymin, xmax, ymax = space.bounding_box()
    img = heatmap.as_image()
    im = ax.imshow(img, origin="lower", extent=(xmin, xmin + grid.nx * grid.spacing,
                                                ymin, ymin + grid.ny * grid.spacing),
                   vmin=0.0, vmax=1.0, cmap="viridis")
    for obs in space.obstacles:
        ax.add_patch(MplPolygon(obs.as_array(), closed=True, facecolor="0.35",
                                edgecolor="black", zorder=3))
    ax.add_patch(MplPolygon(space.outer.as_array(), closed=True, fill=False,
                            edgecolor="black", linewidth=1.2, zorder=4))
    for i, p in enumerate(fleet.positions):
        ax.plot(p.x, p.y, "o", color="white", markeredgecolor="black",
                markersize=9, zorder=5)
        ax.annotate(str(i), (p.x, p.y), ha="center", va="center",
                    fontsize=7, zorder=6)
    ax.set_xlim(xmin, xmax)
    ax.set_ylim(ymin, ymax)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, shrink=0.85, label="joint detection probability")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_history(state: ProcessState, path: str | Path) -> None:
    """Objective trace over iterations with escape phases shaded."""
    fig, ax = plt.subplots(figsize=(7, 4))
    iters = [r.iteration for r in state.history]
    values = [r.objective for r in state.history]
    ax.plot(iters, values, lw=1.2, color="tab:blue")
    in_boost = None
    for r in state.history:
        if r.phase == "boosted" and in_boost is None:
            in_boost = r.iteration
        elif r.phase != "boosted" and in_boost is not None:
            ax.axvspan(in_boost, r.iteration, color="tab:orange", alpha=0.18)
            in_boost = None
    if in_boost is not None:
        ax.axvspan(in_boost, iters[-1], color="tab:orange", alpha=0.18)
    ax.set_xlabel("iteration")
    ax.set_ylabel("coverage objective H")
    ax.set_title("objective trace (shaded: boosted phases)")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_comparison(table, path: str | Path) -> None:
    """Horizontal bar chart of final objectives per parameterization."""
    fig, ax = plt.subplots(figsize=(7, 0.5 * max(len(table.rows), 2) + 1.5))
    labels = [f"{r.family} g={r.gamma} k={r.k:g}" for r in table.rows]
    values = [r.objective for r in table.rows]
    y = np.arange(len(labels))
    ax.barh(y, values, color="tab:blue")
    ax.set_yticks(y, labels, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("final objective H*")
    ax.set_title(f"scenario: {table.scenario}")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
