"""Heat-map figures of the per-layer density and voltage grids."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .board import natural_key  # noqa: E402


def _extent(g):
    ny, nx = g.values.shape
    x0, y0 = g.origin
    return (x0, x0 + nx * g.cell_size, y0, y0 + ny * g.cell_size)


def heatmap(grid, values, title, units, path, cmap):
    fig, ax = plt.subplots(figsize=(8, 6), dpi=100)
    masked = np.ma.masked_invalid(values)
    im = ax.imshow(masked, origin="lower", extent=_extent(grid), cmap=cmap, interpolation="nearest")
    if grid.max_location is not None and values is grid.values:
        ax.plot(*grid.max_location, marker="x", color="white", markersize=8)
    ax.set_xlabel("x (mm)")
    ax.set_ylabel("y (mm)")
    ax.set_title(title)
    fig.colorbar(im, ax=ax, label=units)
    fig.tight_layout()
    # fixed metadata keeps the PNG bytes stable between runs
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def save_heatmaps(grids, out_dir) -> list:
    paths = []
    for g in sorted(grids, key=lambda g: natural_key(g.layer)):
        paths.append(heatmap(g, g.values, f"|J| on {g.layer} (max {g.max_value:.2f} A/mm2)", "A/mm2",
                             os.path.join(out_dir, f"density_{g.layer}.png"), "inferno"))
        paths.append(heatmap(g, g.voltage, f"Voltage on {g.layer}", "V",
                             os.path.join(out_dir, f"voltage_{g.layer}.png"), "viridis"))
    return paths
