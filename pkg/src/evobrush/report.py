"""Figure rendering for run and pruning reports.

Figures are written to files next to the CSV output; nothing here touches
an interactive backend.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from evobrush.generator import DrawCommandList
from evobrush.raster import Canvas, rasterize


def save_fitness_curve(history: list[tuple[int, float]], path) -> None:
    """Best-fitness-so-far as a step curve over tournament index."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    if history:
        t = [h[0] for h in history]
        f = [h[1] for h in history]
        ax.step(t, f, where="post", color="tab:blue")
        ax.plot(t, f, ".", color="tab:blue", ms=4)
    ax.set_xlabel("tournament")
    ax.set_ylabel("best fitness")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _highlight(full: Canvas, without: Canvas) -> np.ndarray:
    """Full render with the pixels owned by the removed element tinted red."""
    img = full.pixels.copy()
    changed = np.any(full.pixels != without.pixels, axis=2)
    img[changed] = 0.25 * img[changed] + 0.75 * np.array([1.0, 0.1, 0.1], dtype=np.float32)
    return img


def save_prune_figure(
    cmds: DrawCommandList,
    ranking: list[tuple[int, float]],
    resolution: int,
    path,
) -> None:
    """Grid of renders, one panel per ranked element, most important first.

    Each panel tints the pixels that disappear when that element is removed.
    """
    full = rasterize(cmds, resolution, resolution)
    n = len(ranking)
    cols = min(5, max(1, n))
    rows = max(1, (n + cols - 1) // cols)
    fig, axes = plt.subplots(rows, cols, figsize=(2.2 * cols, 2.4 * rows), squeeze=False)
    for ax in axes.ravel():
        ax.axis("off")
    objects = np.asarray(cmds.stroke_objects)
    for panel, (element_id, drop) in enumerate(ranking):
        keep = np.flatnonzero(objects != element_id)
        without = rasterize(cmds.restricted_to_strokes(keep), resolution, resolution)
        ax = axes[panel // cols, panel % cols]
        ax.imshow(_highlight(full, without))
        ax.set_title(f"#{element_id}  drop {drop:+.4f}", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
