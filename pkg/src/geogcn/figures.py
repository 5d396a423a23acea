"""Matplotlib renders of the report artifacts.

Every CLI report command writes one PNG next to its delimited output:
training curves, multi-run error envelopes, count-distribution histograms,
and heatmap rasters. Rendering is headless (Agg) and never required for the
numeric outputs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .raster import RasterGrid
from .training import DistributionStats, RunEnvelope, TrainHistory

_DPI = 130


def save_history_plot(history: TrainHistory, path) -> None:
    """Loss (log scale targets) and validation count error over epochs."""
    epochs = np.arange(1, history.epochs + 1)
    fig, ax_loss = plt.subplots(figsize=(7, 4))
    ax_err = ax_loss.twinx()
    ax_loss.plot(epochs, history.loss, color="tab:blue", lw=1.0, label="training L1 loss")
    ax_err.plot(epochs, history.abs_error, color="tab:orange", lw=1.0,
                label="validation abs. error")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("L1 loss (log-count scale)", color="tab:blue")
    ax_err.set_ylabel("abs. error (counts)", color="tab:orange")
    ax_loss.set_title(f"training run (seed {history.seed})")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_envelope_plot(envelope: RunEnvelope, path) -> None:
    """Mean error curve with the min-max band across runs."""
    epochs = np.arange(1, envelope.epochs + 1)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.fill_between(epochs, envelope.min, envelope.max, color="tab:orange",
                    alpha=0.25, label="min-max over runs")
    ax.plot(epochs, envelope.mean, color="tab:orange", lw=1.2, label="mean error")
    ax.set_xlabel("epoch")
    ax.set_ylabel("validation abs. error (counts)")
    ax.set_title(f"{envelope.completed_runs} runs")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_distribution_plot(
    actual: DistributionStats, predicted: DistributionStats, path
) -> None:
    """Side-by-side histograms of actual and predicted counts."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6), sharey=True)
    for ax, stats, label in ((axes[0], actual, "actual"), (axes[1], predicted, "predicted")):
        widths = np.diff(stats.bin_edges)
        ax.bar(stats.bin_edges[:-1], stats.bin_counts, width=widths, align="edge",
               color="tab:blue", edgecolor="white", linewidth=0.3)
        if stats.log_x:
            ax.set_xscale("log")
        ax.set_title(f"{label} (skew {stats.skewness:.2f})")
        ax.set_xlabel("check-ins")
    axes[0].set_ylabel("locations")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_raster_plot(grid: RasterGrid, path, scale: tuple[float, float] | None = None) -> None:
    """Render a heatmap grid with its spatial extent, north up."""
    x0, y0 = grid.origin
    extent = (x0, x0 + grid.width * grid.cell_size, y0, y0 + grid.height * grid.cell_size)
    vmin, vmax = scale if scale is not None else (None, None)
    fig, ax = plt.subplots(figsize=(6, 6 * grid.height / max(grid.width, 1)))
    im = ax.imshow(grid.as_array(), origin="lower", extent=extent, cmap="inferno",
                   vmin=vmin, vmax=vmax)
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    fig.colorbar(im, ax=ax, shrink=0.8, label="kernel-weighted intensity")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
