"""Holdout splitting, stratified cross-validation, and evaluation reports.

Reports serialize without the wall-time field so repeated runs over the same
inputs produce byte-identical files; timing appears only in the human summary.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..features import LABEL_TOKENS, FeatureMatrix
from . import ModelError, ModelSpec, TrainedModel, predict, train_model


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray) -> np.ndarray:
    """2x2 counts, rows = true class, columns = predicted class."""
    conf = np.zeros((2, 2), dtype=np.int64)
    np.add.at(conf, (y_true.astype(np.int64), y_pred.astype(np.int64)), 1)
    return conf


def accuracy_from_confusion(conf: np.ndarray) -> float:
    return float(np.trace(conf) / conf.sum())


@dataclass
class EvaluationReport:
    model_kind: str
    cv_confusion: np.ndarray | None = None
    cv_accuracy: float | None = None
    fold_accuracies: tuple[float, ...] | None = None
    test_confusion: np.ndarray | None = None
    test_accuracy: float | None = None
    train_seconds: float | None = None


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def holdout_split(matrix: FeatureMatrix, test_fraction: float = 0.10,
                  seed: int = 0, group_windows: bool = False):
    """Stratified train/test split, deterministic in the seed.

    With group_windows=True whole windows move together, so the two hands of
    one window never straddle the split.
    """
    n = len(matrix.labels)
    if n < 10:
        raise ModelError(f"holdout split needs at least 10 rows, got {n}")
    if not 0.0 < test_fraction < 1.0:
        raise ModelError(f"test_fraction must be in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    test_rows = np.zeros(n, dtype=bool)
    if group_windows:
        windows = np.unique(matrix.window_ids)
        n_test_w = _round_half_up(test_fraction * len(windows))
        chosen = rng.permutation(windows)[:n_test_w]
        test_rows = np.isin(matrix.window_ids, chosen)
    else:
        for c in range(2):
            idx = np.nonzero(matrix.labels == c)[0]
            n_test = _round_half_up(test_fraction * len(idx))
            chosen = rng.permutation(idx)[:n_test]
            test_rows[chosen] = True
    for c, token in enumerate(LABEL_TOKENS):
        if not np.any((matrix.labels == c) & test_rows):
            raise ModelError(f"class {token} absent from test split")
        if not np.any((matrix.labels == c) & ~test_rows):
            raise ModelError(f"class {token} absent from train split")
    return matrix.subset_rows(~test_rows), matrix.subset_rows(test_rows)


def cross_validate(matrix: FeatureMatrix, spec: ModelSpec, k: int = 5,
                   seed: int = 0) -> EvaluationReport:
    """Stratified k-fold cross-validation; every row is predicted exactly once
    by a model whose training folds exclude it."""
    if k < 2:
        raise ModelError(f"cross-validation needs k >= 2, got {k}")
    labels = matrix.labels
    fold_of = np.empty(len(labels), dtype=np.int64)
    rng = np.random.default_rng(seed)
    for c, token in enumerate(LABEL_TOKENS):
        idx = np.nonzero(labels == c)[0]
        if len(idx) < k:
            raise ModelError(
                f"class {token} has {len(idx)} rows, fewer than {k} folds")
        perm = rng.permutation(idx)
        fold_of[perm] = np.arange(len(perm)) % k
    conf = np.zeros((2, 2), dtype=np.int64)
    fold_acc: list[float] = []
    fit_seconds = 0.0
    for f in range(k):
        test_mask = fold_of == f
        train = matrix.subset_rows(~test_mask)
        test = matrix.subset_rows(test_mask)
        t0 = time.perf_counter()
        model = train_model(train, spec)
        fit_seconds += time.perf_counter() - t0
        pred = predict(model, test)
        fold_conf = confusion_matrix(test.labels, pred)
        conf += fold_conf
        fold_acc.append(accuracy_from_confusion(fold_conf))
    return EvaluationReport(model_kind=spec.kind, cv_confusion=conf,
                            cv_accuracy=accuracy_from_confusion(conf),
                            fold_accuracies=tuple(fold_acc),
                            train_seconds=fit_seconds)


def evaluate_holdout(model: TrainedModel, test: FeatureMatrix) -> EvaluationReport:
    if len(test.labels) == 0:
        raise ModelError("empty test matrix")
    pred = predict(model, test)
    conf = confusion_matrix(test.labels, pred)
    return EvaluationReport(model_kind=model.kind, test_confusion=conf,
                            test_accuracy=accuracy_from_confusion(conf))


def run_experiment(matrix: FeatureMatrix, spec: ModelSpec, k: int = 5,
                   test_fraction: float = 0.10, seed: int = 0,
                   group_windows: bool = False) -> EvaluationReport:
    """Holdout split, cross-validate on the training portion, then score a
    model fit on the full training portion against the held-out rows."""
    train, test = holdout_split(matrix, test_fraction, seed, group_windows)
    report = cross_validate(train, spec, k=k, seed=seed)
    t0 = time.perf_counter()
    model = train_model(train, spec)
    fit_seconds = time.perf_counter() - t0
    test_report = evaluate_holdout(model, test)
    report.test_confusion = test_report.test_confusion
    report.test_accuracy = test_report.test_accuracy
    report.train_seconds = (report.train_seconds or 0.0) + fit_seconds
    return report


def report_to_dict(report: EvaluationReport) -> dict:
    """JSON-ready form of a report.  Wall time is deliberately left out so the
    serialized report is a pure function of the inputs."""
    def conf(m):
        return None if m is None else [[int(v) for v in row] for row in m]
    return {
        "model_kind": report.model_kind,
        "cv_confusion": conf(report.cv_confusion),
        "cv_accuracy": report.cv_accuracy,
        "fold_accuracies": (None if report.fold_accuracies is None
                            else list(report.fold_accuracies)),
        "test_confusion": conf(report.test_confusion),
        "test_accuracy": report.test_accuracy,
        "label_tokens": list(LABEL_TOKENS),
    }


def write_report(report: EvaluationReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n",
        encoding="utf-8")


def read_report(path: str | Path) -> EvaluationReport:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    def conf(m):
        return None if m is None else np.array(m, dtype=np.int64)
    return EvaluationReport(
        model_kind=d["model_kind"],
        cv_confusion=conf(d["cv_confusion"]),
        cv_accuracy=d["cv_accuracy"],
        fold_accuracies=(None if d["fold_accuracies"] is None
                         else tuple(d["fold_accuracies"])),
        test_confusion=conf(d["test_confusion"]),
        test_accuracy=d["test_accuracy"])


def _format_confusion(conf: np.ndarray) -> list[str]:
    width = max(len(t) for t in LABEL_TOKENS) + 2
    cell = max(len(t) for t in LABEL_TOKENS) + 2
    head = " " * (width + 5) + "".join(t.rjust(cell) for t in LABEL_TOKENS)
    lines = [" " * (width + 5) + "predicted".rjust(cell), head]
    for c, token in enumerate(LABEL_TOKENS):
        row = "".join(str(int(v)).rjust(cell) for v in conf[c])
        lines.append(f"true {token.ljust(width)}{row}")
    return lines


def format_report_summary(report: EvaluationReport) -> str:
    lines = [f"model: {report.model_kind}"]
    if report.cv_confusion is not None:
        folds = ", ".join(f"{a:.4f}" for a in report.fold_accuracies)
        lines.append(f"cross-validation accuracy: {report.cv_accuracy:.4f}"
                     f" (per fold: {folds})")
        lines.append("cross-validation confusion:")
        lines.extend(_format_confusion(report.cv_confusion))
    if report.test_confusion is not None:
        lines.append(f"test accuracy: {report.test_accuracy:.4f}")
        lines.append("test confusion:")
        lines.extend(_format_confusion(report.test_confusion))
    if report.train_seconds is not None:
        lines.append(f"training wall-time: {report.train_seconds:.3f} s")
    return "\n".join(lines) + "\n"
