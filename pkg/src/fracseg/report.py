"""Run-report rendering: delimited tables plus diagnostic figures."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .core import MaskStack
from .pipeline import RunReport


def write_report_tables(report: RunReport, out_dir: str | Path) -> tuple[Path, Path]:
    """Write per-slice rows and the resolved-parameter table as CSV."""
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    slices_path = d / "report.csv"
    with slices_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "source", "seconds", "mask_pixels", "mask_fraction", "converged"])
        for rec in report.slices:
            writer.writerow(
                [rec.index, rec.source, f"{rec.seconds:.6f}", rec.mask_pixels,
                 f"{rec.mask_fraction:.6f}", "" if rec.converged is None else rec.converged]
            )
    params_path = d / "parameters.csv"
    with params_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["parameter", "value"])
        for key in sorted(report.parameters):
            writer.writerow([key, report.parameters[key]])
    return slices_path, params_path


def render_report_figures(
    report: RunReport, masks: MaskStack, out_dir: str | Path, example_image=None
) -> list[Path]:
    """Render per-slice fraction/timing plots and an overlay montage."""
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    idx = [rec.index for rec in report.slices]

    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(idx, [rec.mask_fraction for rec in report.slices], marker="o", ms=3)
    ax.set_xlabel("slice")
    ax.set_ylabel("segmented fraction")
    ax.set_title(f"segmented fraction per slice ({report.method})")
    fig.tight_layout()
    p = d / "fraction_per_slice.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    paths.append(p)

    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(idx, [rec.seconds for rec in report.slices], width=0.8)
    ax.set_xlabel("slice")
    ax.set_ylabel("seconds")
    ax.set_title("processing time per slice")
    fig.tight_layout()
    p = d / "timing_per_slice.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    paths.append(p)

    if len(masks):
        mid = len(masks) // 2
        fig, axes = plt.subplots(1, 2 if example_image is not None else 1, figsize=(8, 4), squeeze=False)
        if example_image is not None:
            axes[0][0].imshow(example_image.data, cmap="gray", vmin=0, vmax=1)
            axes[0][0].set_title(f"slice {mid}")
            axes[0][0].axis("off")
        overlay_ax = axes[0][-1]
        overlay_ax.imshow(masks.masks[mid].data, cmap="gray")
        overlay_ax.set_title(f"mask {mid}")
        overlay_ax.axis("off")
        fig.tight_layout()
        p = d / "mask_montage.png"
        fig.savefig(p, dpi=120)
        plt.close(fig)
        paths.append(p)
    return paths
