"""Figures for a finished run: loss curves, the metric table and difference series."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

PNG_META = {"Software": None}

METRIC_ROWS = ("in_deg_mmd", "out_deg_mmd", "clus_mmd", "in_ple_err", "out_ple_err", "wedge_err",
               "nc_err", "lcc_err", "attr_jsd", "attr_emd", "spearman_err")
SERIES_ORDER = ("degree", "clustering", "coreness", "attr_mae", "attr_rmse")


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=100, metadata=PNG_META)
    plt.close(fig)
    return path


def loss_curves(train_report: dict, path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    epochs = range(1, len(train_report["epoch_total"]) + 1)
    for key, label in (("epoch_total", "total"), ("epoch_prior", "prior (KL)"),
                       ("epoch_structure", "structure"), ("epoch_attribute", "attribute")):
        ax.plot(epochs, train_report[key], label=label)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss (sum over steps)")
    ax.set_yscale("symlog")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, Path(path))


def metric_table(metrics: dict, path) -> Path:
    rows = []
    for key in METRIC_ROWS:
        v = metrics.get(key)
        rows.append([key, "n/a" if v is None else f"{v:.4g}"])
    fig, ax = plt.subplots(figsize=(4.5, 0.32 * len(rows) + 0.6))
    ax.axis("off")
    table = ax.table(cellText=rows, colLabels=["metric", "value"], loc="center", cellLoc="left")
    table.scale(1, 1.2)
    fig.tight_layout()
    return _save(fig, Path(path))


def diff_series_plot(orig: dict, gen: dict, path) -> Path:
    keys = [k for k in SERIES_ORDER if k in orig]
    fig, axes = plt.subplots(1, len(keys), figsize=(3.2 * len(keys), 3), squeeze=False)
    for ax, key in zip(axes[0], keys):
        steps = range(1, len(orig[key]) + 1)
        ax.plot(steps, orig[key], marker="o", label="original")
        if gen and key in gen:
            ax.plot(steps, gen[key], marker="s", label="generated")
        ax.set_title(key)
        ax.set_xlabel("t -> t+1")
        ax.grid(alpha=0.3)
    axes[0][0].legend()
    fig.tight_layout()
    return _save(fig, Path(path))
