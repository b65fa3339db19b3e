"""File renderers for report artifacts: ridgeline CSV + SVG figures."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "osshealth"  # reproducible element ids

import matplotlib.pyplot as plt
import numpy as np

from .diagnostics import RidgelineSeries

BAND_COLORS = {1: "#4c72b0", 2: "#55a868", 3: "#c44e52", 4: "#8172b2"}


def write_ridgeline_csv(series_list, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "class", "x", "density", "quartile_band"])
        for series in series_list:
            for curve in series.curves:
                bands = curve.quartile_band()
                for x, d, band in zip(curve.x, curve.density, bands):
                    writer.writerow([
                        series.feature, curve.stage.slug(),
                        repr(float(x)), repr(float(d)), int(band),
                    ])


def render_ridgeline_svg(series: RidgelineSeries, path) -> None:
    """One stacked figure per feature; ridge fills are colored by
    quartile band, class order fixed top-to-bottom."""
    n = len(series.curves)
    fig, axes = plt.subplots(n, 1, figsize=(8, 1.8 * n), sharex=True, squeeze=False)
    for ax, curve in zip(axes[:, 0], series.curves):
        bands = curve.quartile_band()
        for band in (1, 2, 3, 4):
            mask = bands == band
            if mask.any():
                ax.fill_between(curve.x, 0, curve.density, where=mask,
                                color=BAND_COLORS[band], linewidth=0)
        ax.plot(curve.x, curve.density, color="black", linewidth=0.8)
        ax.set_ylabel(curve.stage.slug(), rotation=0, ha="right", va="center")
        ax.set_yticks([])
        for spine in ("top", "right", "left"):
            ax.spines[spine].set_visible(False)
    axes[-1, 0].set_xlabel(series.feature)
    fig.suptitle(series.feature)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def render_partial_dependence_svg(feature_name, grid, curves, class_names, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, curve in zip(class_names, curves):
        ax.plot(grid, curve, label=name)
    ax.set_xlabel(feature_name)
    ax.set_ylabel("mean predicted probability")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def render_spearman_heatmap_svg(rho, column_names, path) -> None:
    fig, ax = plt.subplots(figsize=(9, 8))
    im = ax.imshow(np.asarray(rho), vmin=-1, vmax=1, cmap="RdBu_r")
    ax.set_xticks(range(len(column_names)))
    ax.set_xticklabels(column_names, rotation=90, fontsize=7)
    ax.set_yticks(range(len(column_names)))
    ax.set_yticklabels(column_names, fontsize=7)
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
