"""Render pipeline artifacts into figures and a plain-text summary.

Consumes the files the other stages emit (evaluation reports, MRMR
rankings) rather than in-memory objects, so a report can be rebuilt at any
time from a finished run directory.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .features import LABEL_TOKENS
from .models import EvaluationReport
from .selection import MrmrRanking


class ReportError(Exception):
    pass


def render_confusion_figure(conf: np.ndarray, title: str, path: str | Path) -> Path:
    """2x2 heatmap with absolute counts and row percentages."""
    conf = np.asarray(conf, dtype=np.int64)
    if conf.shape != (2, 2):
        raise ReportError(f"confusion matrix must be 2x2, got {conf.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(4.2, 3.6), constrained_layout=True)
    ax.imshow(conf, cmap="Blues", vmin=0)
    row_totals = conf.sum(axis=1, keepdims=True)
    threshold = conf.max() / 2 if conf.max() else 0.5
    for i in range(2):
        for j in range(2):
            pct = 100.0 * conf[i, j] / row_totals[i, 0] if row_totals[i, 0] else 0.0
            color = "white" if conf[i, j] > threshold else "black"
            ax.text(j, i, f"{conf[i, j]}\n{pct:.1f}%", ha="center", va="center",
                    color=color)
    ax.set_xticks([0, 1], LABEL_TOKENS)
    ax.set_yticks([0, 1], LABEL_TOKENS)
    ax.set_xlabel("predicted")
    ax.set_ylabel("actual")
    ax.set_title(title)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_ranking_figure(ranking: MrmrRanking, path: str | Path,
                          top_k: int | None = None) -> Path:
    """Horizontal bar chart of selection scores, best feature on top."""
    if not ranking.entries:
        raise ReportError("ranking has no entries")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = [name for name, _ in ranking.entries]
    scores = [score for _, score in ranking.entries]
    height = max(2.5, 0.28 * len(names) + 1.2)
    fig, ax = plt.subplots(figsize=(7.0, height), constrained_layout=True)
    ypos = np.arange(len(names))[::-1]
    colors = ["tab:orange" if top_k and i < top_k else "tab:blue"
              for i in range(len(names))]
    ax.barh(ypos, scores, color=colors)
    ax.set_yticks(ypos, names, fontsize=8)
    ax.set_xlabel(f"MRMR score ({ranking.scheme})")
    title = "Feature ranking"
    if top_k:
        title += f" (top {top_k} highlighted)"
    ax.set_title(title)
    ax.grid(axis="x", alpha=0.3)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_report_figures(report: EvaluationReport, out_dir: str | Path,
                          stem: str | None = None) -> list[Path]:
    out_dir = Path(out_dir)
    stem = stem or report.model_kind
    written = []
    if report.cv_confusion is not None:
        title = f"{report.model_kind} cross-validation"
        if report.cv_accuracy is not None:
            title += f" (accuracy {report.cv_accuracy:.3f})"
        written.append(render_confusion_figure(
            report.cv_confusion, title, out_dir / f"{stem}_cv_confusion.png"))
    if report.test_confusion is not None:
        title = f"{report.model_kind} holdout"
        if report.test_accuracy is not None:
            title += f" (accuracy {report.test_accuracy:.3f})"
        written.append(render_confusion_figure(
            report.test_confusion, title, out_dir / f"{stem}_test_confusion.png"))
    return written


def summarize_reports(reports: list[EvaluationReport]) -> str:
    """Fixed-width table, one model per row."""
    if not reports:
        raise ReportError("no reports to summarize")
    header = f"{'model':<22} {'cv_accuracy':>12} {'test_accuracy':>14} {'folds':>6} {'fold_min':>9} {'fold_max':>9}"
    lines = [header, "-" * len(header)]
    for report in reports:
        cv = "-" if report.cv_accuracy is None else f"{report.cv_accuracy:.4f}"
        test = "-" if report.test_accuracy is None else f"{report.test_accuracy:.4f}"
        if report.fold_accuracies:
            folds = str(len(report.fold_accuracies))
            fmin = f"{min(report.fold_accuracies):.4f}"
            fmax = f"{max(report.fold_accuracies):.4f}"
        else:
            folds = fmin = fmax = "-"
        lines.append(f"{report.model_kind:<22} {cv:>12} {test:>14} {folds:>6} {fmin:>9} {fmax:>9}")
    return "\n".join(lines) + "\n"


def render_summary(reports: list[EvaluationReport], out_dir: str | Path,
                   ranking: MrmrRanking | None = None,
                   top_k: int | None = None) -> list[Path]:
    """Text summary plus every figure the inputs support; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    summary = out_dir / "summary.txt"
    summary.write_text(summarize_reports(reports), encoding="utf-8")
    written.append(summary)
    for report in reports:
        written.extend(render_report_figures(report, out_dir))
    if ranking is not None:
        written.append(render_ranking_figure(ranking, out_dir / "ranking.png",
                                             top_k=top_k))
    return written
