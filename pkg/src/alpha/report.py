"""Confusion metrics, per-type result tables and plot-data emission.

The metrics CSV mirrors the result-table layout: the tp/fn/fp/tn columns
hold the final-layer confusion only, while accuracy/precision/recall/f1 are
computed over every decided sample (first-pass verdicts included). Excluded
samples are reported in the verdict stream, never silently dropped.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import MissingLabel
from .ingest import BENIGN, MALICIOUS
from .pipeline import EXCLUDED, LAYER1, LAYER3, FunctionLossReport, Verdict

METRICS_HEADER = ["type", "l1_malware", "l1_benign", "l1_flagged",
                  "tp", "fn", "fp", "tn",
                  "accuracy", "precision", "recall", "f1"]
VERDICTS_HEADER = ["sample_id", "decision", "decided_at", "layer1_distance", "malicious_percent"]
LOSS_HEADER = ["Filename", "Initial Length", "After Deduplication Length",
               "Found in Benign", "Found in Malicious", "Final Instructions Left"]
SCATTER_HEADER = ["functions", "malicious_percent", "label"]
DENSITY_HEADER = ["sample_id", "minute", "instructions"]
ZIPF_HEADER = ["rank", "word", "frequency"]


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fn: int = 0
    fp: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn


@dataclass(frozen=True)
class Metrics:
    """Percentages in [0, 100]; None marks an undefined denominator."""

    accuracy: float | None
    precision: float | None
    recall: float | None
    f1: float | None


def confusion_metrics(c: ConfusionCounts) -> Metrics:
    """Accuracy, precision, recall and F1 from raw confusion counts."""
    if c.total <= 0:
        raise ValueError("confusion counts sum to zero")
    accuracy = 100.0 * (c.tp + c.tn) / c.total
    precision = 100.0 * c.tp / (c.tp + c.fp) if (c.tp + c.fp) else None
    recall = 100.0 * c.tp / (c.tp + c.fn) if (c.tp + c.fn) else None
    f1 = None
    if precision is not None and recall is not None and (precision + recall) > 0:
        f1 = 2.0 * precision * recall / (precision + recall)
    return Metrics(accuracy, precision, recall, f1)


def format_percent(value: float | None) -> str:
    return "N/A" if value is None else f"{value:.2f}"


@dataclass(frozen=True)
class TypeSummary:
    malware_type: str
    l1_malware: int
    l1_benign: int
    l1_flagged: int
    excluded: int
    layer3: ConfusionCounts
    combined: ConfusionCounts
    metrics: Metrics


def _truth_label(truth: Mapping[str, tuple[str, str | None]], sample_id: str) -> tuple[str, str | None]:
    if sample_id not in truth:
        raise MissingLabel(f"no ground-truth label for sample {sample_id!r}")
    return truth[sample_id]


def summarize_by_type(
    verdicts: Sequence[Verdict],
    truth: Mapping[str, tuple[str, str | None]],
) -> list[TypeSummary]:
    """Aggregate verdicts per malware type; benign samples join every row."""
    for v in verdicts:
        _truth_label(truth, v.sample_id)
    types = sorted({
        mtype or "malicious"
        for label, mtype in truth.values()
        if label == MALICIOUS
    })
    if not types:
        types = ["all"]
    rows = []
    for mtype in types:
        members = [
            v for v in verdicts
            if truth[v.sample_id][0] == BENIGN
            or (truth[v.sample_id][1] or "malicious") == mtype
        ]
        l1_mal = sum(1 for v in members if v.decided_at == LAYER1 and v.decision == MALICIOUS)
        l1_ben = sum(1 for v in members if v.decided_at == LAYER1 and v.decision == BENIGN)
        excluded = sum(1 for v in members if v.decision == EXCLUDED)
        c3 = {"tp": 0, "fn": 0, "fp": 0, "tn": 0}
        call = {"tp": 0, "fn": 0, "fp": 0, "tn": 0}
        for v in members:
            if v.decision == EXCLUDED:
                continue
            actual = truth[v.sample_id][0]
            if v.decision == MALICIOUS:
                cell = "tp" if actual == MALICIOUS else "fp"
            else:
                cell = "fn" if actual == MALICIOUS else "tn"
            call[cell] += 1
            if v.decided_at == LAYER3:
                c3[cell] += 1
        layer3 = ConfusionCounts(**c3)
        combined = ConfusionCounts(**call)
        metrics = confusion_metrics(combined) if combined.total else Metrics(None, None, None, None)
        rows.append(TypeSummary(
            malware_type=mtype,
            l1_malware=l1_mal,
            l1_benign=l1_ben,
            l1_flagged=layer3.total,
            excluded=excluded,
            layer3=layer3,
            combined=combined,
            metrics=metrics,
        ))
    return rows


# --- delimited output ---

def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence], preamble: str = "") -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if preamble:
            fh.write(preamble.rstrip("\n") + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def read_csv_rows(path: str | Path) -> list[dict[str, str]]:
    """Read a CSV written by this package, skipping comment preambles."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


def verdicts_csv(verdicts: Sequence[Verdict], path: str | Path, preamble: str = "") -> None:
    rows = []
    for v in verdicts:
        rows.append([
            v.sample_id,
            v.decision,
            v.decided_at,
            "" if v.layer1_distance is None else f"{v.layer1_distance:.6f}",
            "" if v.malicious_percent is None else f"{v.malicious_percent:.4f}",
        ])
    write_csv(path, VERDICTS_HEADER, rows, preamble)


def read_verdicts(path: str | Path) -> list[Verdict]:
    out = []
    for row in read_csv_rows(path):
        out.append(Verdict(
            sample_id=row["sample_id"],
            decision=row["decision"],
            decided_at=row["decided_at"],
            layer1_distance=float(row["layer1_distance"]) if row["layer1_distance"] else None,
            malicious_percent=float(row["malicious_percent"]) if row["malicious_percent"] else None,
        ))
    return out


def loss_reports_csv(reports: Sequence[FunctionLossReport], path: str | Path, preamble: str = "") -> None:
    rows = [
        [r.sample_id, r.initial_length, r.deduplicated_length,
         r.found_in_benign, r.found_in_malicious, r.remaining]
        for r in reports
    ]
    write_csv(path, LOSS_HEADER, rows, preamble)


def metrics_csv(summaries: Sequence[TypeSummary], path: str | Path, preamble: str = "") -> None:
    rows = []
    for s in summaries:
        rows.append([
            s.malware_type, s.l1_malware, s.l1_benign, s.l1_flagged,
            s.layer3.tp, s.layer3.fn, s.layer3.fp, s.layer3.tn,
            format_percent(s.metrics.accuracy), format_percent(s.metrics.precision),
            format_percent(s.metrics.recall), format_percent(s.metrics.f1),
        ])
    write_csv(path, METRICS_HEADER, rows, preamble)


def scatter_rows(
    verdicts: Sequence[Verdict],
    truth: Mapping[str, tuple[str, str | None]],
    loss_reports: Mapping[str, FunctionLossReport] | None = None,
) -> list[tuple[int, float, str]]:
    """(functions, malicious percent, label) triples for decided samples."""
    rows = []
    for v in verdicts:
        if v.malicious_percent is None:
            continue
        label, _ = _truth_label(truth, v.sample_id)
        count = v.function_count
        if count is None and loss_reports and v.sample_id in loss_reports:
            count = loss_reports[v.sample_id].remaining
        if count is None:
            continue
        rows.append((count, v.malicious_percent, label))
    return rows


def emit_report(
    verdicts: Sequence[Verdict],
    truth: Mapping[str, tuple[str, str | None]],
    out_dir: str | Path,
    loss_reports: Mapping[str, FunctionLossReport] | None = None,
    density: Sequence[tuple[str, int, int]] | None = None,
    zipf: Sequence[tuple[int, str, int]] | None = None,
    preamble: str = "",
    figures: bool = True,
) -> list[TypeSummary]:
    """Write metrics.csv plus plot-data CSVs (and figures) into a directory."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summaries = summarize_by_type(verdicts, truth)
    metrics_csv(summaries, out_dir / "metrics.csv", preamble)

    scatter = scatter_rows(verdicts, truth, loss_reports)
    write_csv(out_dir / "scatter.csv", SCATTER_HEADER,
              [(c, f"{p:.4f}", label) for c, p, label in scatter], preamble)
    if density is not None:
        write_csv(out_dir / "density.csv", DENSITY_HEADER, density, preamble)
    if zipf is not None:
        write_csv(out_dir / "zipf.csv", ZIPF_HEADER, zipf, preamble)

    if figures:
        from . import figures as fig

        fig.render_scatter(scatter, out_dir / "scatter.png")
        if density is not None:
            fig.render_density(density, out_dir / "density.png")
        if zipf is not None:
            fig.render_zipf(zipf, out_dir / "zipf.png")
    return summaries
