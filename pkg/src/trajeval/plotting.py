"""Figure rendering for reports: score histograms with the decision threshold,
report tables and sweep curves. SVG output is byte-deterministic."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

matplotlib.rcParams["svg.hashsalt"] = "trajeval"


def save_figure(fig, path: str | Path) -> Path:
    """Write a figure; SVG bytes are reproducible (fixed hash salt, no date)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    kwargs = {}
    if path.suffix == ".svg":
        kwargs["metadata"] = {"Date": None}
    fig.savefig(path, **kwargs)
    plt.close(fig)
    return path


def threshold_histogram_figure(
    member_scores: Sequence[float],
    non_member_scores: Sequence[float],
    tau: float,
    title: str = "Score distributions and decision threshold",
):
    fig, ax = plt.subplots(figsize=(7, 4.2))
    bins = np.histogram_bin_edges(
        np.concatenate([member_scores, non_member_scores]), bins=30
    )
    ax.hist(member_scores, bins=bins, alpha=0.6, label="members", color="#1f77b4")
    ax.hist(non_member_scores, bins=bins, alpha=0.6, label="non-members", color="#ff7f0e")
    ax.axvline(tau, color="black", linestyle="--", linewidth=1.5, label=f"threshold = {tau:.3g}")
    ax.set_xlabel("minimum distance to released records")
    ax.set_ylabel("count")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    return fig


def report_table_figure(report):
    """Tabular figure of a utility report: models x metrics, best cells bold."""
    entries = report.original.entries
    col_labels = [f"{r.metric_id}\n({r.statistic})" for r in entries]
    row_names = ["original"] + list(report.models.keys())

    def fmt(r):
        if r.value is None:
            return "N/A"
        return f"{r.value:.3f}"

    cell_text = [[fmt(r) for r in report.original.entries]]
    for name in report.models:
        cell_text.append([fmt(r) for r in report.models[name].entries])

    fig, ax = plt.subplots(figsize=(1.6 * len(col_labels) + 2, 0.5 * len(row_names) + 1.6))
    ax.axis("off")
    table = ax.table(
        cellText=cell_text,
        rowLabels=row_names,
        colLabels=col_labels,
        loc="center",
        cellLoc="center",
    )
    table.auto_set_font_size(False)
    table.set_fontsize(9)
    table.scale(1.0, 1.4)
    for j, best in enumerate(report.best):
        for i, name in enumerate(report.models.keys(), start=1):
            if name in best:
                table[(i + 1, j)].set_text_props(fontweight="bold")
    ax.set_title("Utility report", pad=12)
    fig.tight_layout()
    return fig


def sweep_curves_figure(summaries):
    """Mean +/- std of each metric across cell sizes."""
    metrics = sorted({s.metric for s in summaries})
    fig, axes = plt.subplots(
        1, len(metrics), figsize=(4.2 * len(metrics), 3.6), squeeze=False
    )
    for ax, metric in zip(axes[0], metrics):
        rows = [s for s in summaries if s.metric == metric and s.mean is not None]
        edges = [s.edge_m for s in rows]
        means = np.array([s.mean for s in rows])
        stds = np.array([s.std for s in rows])
        ax.plot(edges, means, marker="o", markersize=3)
        ax.fill_between(edges, means - stds, means + stds, alpha=0.25)
        ax.set_title(metric)
        ax.set_xlabel("cell edge (m)")
        ax.set_ylabel("value")
    fig.tight_layout()
    return fig


def cell_size_figure(selection):
    """Diagnostic curves with elbow marks from cell-size selection."""
    names = sorted(selection.curves.keys())
    fig, axes = plt.subplots(1, max(len(names), 1), figsize=(4.2 * max(len(names), 1), 3.6), squeeze=False)
    for ax, name in zip(axes[0], names):
        ax.plot(selection.candidates, selection.curves[name], marker="o", markersize=3)
        ax.axvline(selection.elbows[name], color="red", linestyle=":", label="elbow")
        ax.axvline(selection.edge_m, color="black", linestyle="--", label="selected")
        ax.set_title(name)
        ax.set_xlabel("cell edge (m)")
        ax.legend(fontsize=8)
    fig.tight_layout()
    return fig
