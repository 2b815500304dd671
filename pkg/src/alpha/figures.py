"""Matplotlib renderings of the report's plot data, written next to the CSVs."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_LABEL_COLORS = {"malicious": "tab:red", "benign": "tab:blue"}


def render_scatter(rows: Sequence[tuple[int, float, str]], path: str | Path) -> None:
    """Function count vs malicious share, one dot per decided sample."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for label in ("benign", "malicious"):
        xs = [c for c, _, lab in rows if lab == label]
        ys = [p for _, p, lab in rows if lab == label]
        if xs:
            ax.scatter(xs, ys, s=28, alpha=0.75, label=label,
                       color=_LABEL_COLORS.get(label, "gray"))
    ax.set_xlabel("functions")
    ax.set_ylabel("malicious %")
    ax.set_ylim(-5, 105)
    if any(c > 0 for c, _, _ in rows):
        ax.set_xscale("symlog")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(loc="best")
    ax.set_title("Per-sample function classification")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_density(rows: Sequence[tuple[str, int, int]], path: str | Path) -> None:
    """Per-minute instruction counts, one line per sample."""
    series: dict[str, list[tuple[int, int]]] = defaultdict(list)
    for sample_id, minute, count in rows:
        series[sample_id].append((int(minute), int(count)))
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for sample_id, points in sorted(series.items()):
        points.sort()
        ax.plot([m for m, _ in points], [c for _, c in points],
                marker="o", markersize=3, linewidth=1, alpha=0.7, label=sample_id)
    ax.set_xlabel("minute")
    ax.set_ylabel("instructions")
    ax.set_title("Instruction density per minute")
    if len(series) <= 12:
        ax.legend(fontsize=7, loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_zipf(table: Sequence[tuple[int, str, int]], path: str | Path) -> None:
    """Log-log rank/frequency plot of the word distribution."""
    ranks = [r for r, _, f in table if f > 0]
    freqs = [f for _, _, f in table if f > 0]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(ranks, freqs, marker=".", markersize=3, linestyle="none", alpha=0.7)
    ax.set_xlabel("rank")
    ax.set_ylabel("frequency")
    ax.set_title("Word frequency vs rank")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
