"""Report rendering: delimited output, text summary and figures.

Every experiment run emits a CSV with one row per test subject plus a mean
row, a plain-text table, and (unless disabled) PNG figures next to the CSV:
a per-subject accuracy chart and the aggregate confusion matrix. Output is
byte-reproducible for a fixed report.
"""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .harness import EvalReport

CSV_COLUMNS = ["subject", "classifier", "accuracy_pct", "f1_macro", "tp", "fp", "fn", "tn"]

# Keep PNG output stable across runs: no software/version stamp.
_PNG_METADATA = {"Software": None}


def write_report_csv(report: EvalReport, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in report.rows:
            m = row.result
            writer.writerow(
                [
                    row.subject_id,
                    row.classifier,
                    f"{row.accuracy_pct:.4f}",
                    f"{m.f1_macro:.4f}",
                    m.tp,
                    m.fp,
                    m.fn,
                    m.tn,
                ]
            )
        writer.writerow(
            ["mean", report.classifier,
             f"{100.0 * report.mean_accuracy:.4f}", f"{report.mean_f1:.4f}", "", "", "", ""]
        )


def write_summary_text(report: EvalReport, path: str | Path) -> None:
    """Plain-text per-subject accuracy table with a mean row."""
    lines = [
        f"Classifier: {report.classifier}",
        "",
        f"{'Test subject':>12} | {'Accuracy (%)':>12} | {'F1 (macro)':>10}",
        "-" * 42,
    ]
    for row in report.rows:
        lines.append(
            f"{row.subject_id:>12} | {row.accuracy_pct:>12.1f} | {row.result.f1_macro:>10.3f}"
        )
    lines.append("-" * 42)
    lines.append(
        f"{'Mean':>12} | {100.0 * report.mean_accuracy:>12.1f} | {report.mean_f1:>10.3f}"
    )
    Path(path).write_text("\n".join(lines) + "\n")


def render_figures(report: EvalReport, csv_path: str | Path) -> list[Path]:
    """Render PNG figures alongside the CSV; returns the written paths."""
    stem = Path(csv_path).with_suffix("")
    paths = []

    subjects = [row.subject_id for row in report.rows]
    accs = [row.accuracy_pct for row in report.rows]
    fig, ax = plt.subplots(figsize=(max(6.0, 0.3 * len(subjects) + 2.0), 4.0))
    ax.bar(range(len(subjects)), accs, color="#3465a4")
    ax.axhline(100.0 * report.mean_accuracy, color="#cc0000", linestyle="--",
               label=f"mean {100.0 * report.mean_accuracy:.1f}%")
    ax.set_xticks(range(len(subjects)))
    ax.set_xticklabels([str(s) for s in subjects], rotation=90 if len(subjects) > 12 else 0)
    ax.set_xlabel("Test subject")
    ax.set_ylabel("Accuracy (%)")
    ax.set_ylim(0, 100)
    ax.set_title(f"Per-subject test accuracy ({report.classifier})")
    ax.legend(loc="lower right")
    fig.tight_layout()
    acc_path = Path(f"{stem}_accuracy.png")
    fig.savefig(acc_path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)
    paths.append(acc_path)

    total = np.sum([row.result.confusion for row in report.rows], axis=0)
    fig, ax = plt.subplots(figsize=(4.5, 4.0))
    im = ax.imshow(total, cmap="Blues")
    for (i, j), v in np.ndenumerate(total):
        ax.text(j, i, str(int(v)), ha="center", va="center",
                color="white" if v > total.max() / 2 else "black")
    ax.set_xticks(range(total.shape[1]))
    ax.set_yticks(range(total.shape[0]))
    ax.set_xlabel("Predicted class")
    ax.set_ylabel("True class")
    ax.set_title(f"Aggregate confusion ({report.classifier})")
    fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    conf_path = Path(f"{stem}_confusion.png")
    fig.savefig(conf_path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)
    paths.append(conf_path)
    return paths


def write_report(
    report: EvalReport, csv_path: str | Path, figures: bool = True
) -> list[Path]:
    """Write CSV + text summary (+ figures); returns all written paths."""
    csv_path = Path(csv_path)
    write_report_csv(report, csv_path)
    summary_path = csv_path.with_suffix(".txt")
    write_summary_text(report, summary_path)
    written = [csv_path, summary_path]
    if figures:
        written += render_figures(report, csv_path)
    return written
