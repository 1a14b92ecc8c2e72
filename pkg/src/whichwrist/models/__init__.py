"""Binary classifiers over feature matrices, with a single train/predict API.

Seven model kinds are provided.  Tree models consume categorical features
natively through category-subset splits; the kernel, distance, and linear
models see one-hot encodings, z-scored with training-split statistics where
scale matters (not for naive Bayes, whose per-feature variances already
absorb scale).  Class code 1 means the dominant hand.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..features import FeatureMatrix
from .bayes import fit_gaussian_nb
from .linear import fit_logistic
from .neighbors import fit_knn
from .preprocess import Encoder, fit_encoder
from .svm import fit_svm
from .tree import fit_boosted, fit_tree

MODEL_KINDS = (
    "decision_tree",
    "coarse_tree",
    "boosted_trees",
    "quadratic_svm",
    "knn",
    "gaussian_nb",
    "logistic_regression",
)

TREE_KINDS = ("decision_tree", "coarse_tree", "boosted_trees")

DEFAULT_HYPERPARAMETERS: dict[str, dict[str, float | int]] = {
    "decision_tree": {"max_splits": 100},
    "coarse_tree": {"max_splits": 4},
    "boosted_trees": {"n_learners": 30, "max_splits": 20, "learning_rate": 0.1},
    "quadratic_svm": {"c": 1.0, "tol": 1e-3, "max_iter": 200_000},
    "knn": {"k": 10},
    "gaussian_nb": {"var_floor": 1e-9},
    "logistic_regression": {"l2": 1e-4, "grad_tol": 1e-8, "max_iter": 100},
}


class ModelError(Exception):
    pass


@dataclass(frozen=True)
class ModelSpec:
    """A model kind plus validated hyperparameters.

    Hyperparameters not given fall back to the per-kind defaults; unknown
    names are rejected rather than ignored.
    """
    kind: str
    hyperparameters: Mapping[str, float | int] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ModelError(f"unknown model kind {self.kind!r}; expected one"
                             f" of {', '.join(MODEL_KINDS)}")
        defaults = DEFAULT_HYPERPARAMETERS[self.kind]
        unknown = sorted(set(self.hyperparameters) - set(defaults))
        if unknown:
            raise ModelError(f"unknown hyperparameters for {self.kind}:"
                             f" {', '.join(unknown)}")
        merged = dict(defaults)
        merged.update(self.hyperparameters)
        for name, value in merged.items():
            if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
                raise ModelError(f"hyperparameter {name} must be numeric,"
                                 f" got {value!r}")
            if isinstance(defaults[name], int) and int(value) != value:
                raise ModelError(f"hyperparameter {name} must be an integer,"
                                 f" got {value!r}")
            if value <= 0:
                raise ModelError(f"hyperparameter {name} must be positive,"
                                 f" got {value!r}")
        object.__setattr__(self, "hyperparameters", merged)
        if isinstance(self.seed, bool) or int(self.seed) != self.seed:
            raise ModelError(f"seed must be an integer, got {self.seed!r}")


@dataclass
class TrainedModel:
    kind: str
    spec: ModelSpec
    feature_names: tuple[str, ...]
    categories: dict[str, tuple[str, ...]]
    encoder: Encoder | None
    inner: object


def train_model(matrix: FeatureMatrix, spec: ModelSpec) -> TrainedModel:
    y = matrix.labels.astype(np.int64)
    if len(np.unique(y)) < 2:
        raise ModelError("single-class training data")
    hp = spec.hyperparameters
    categories = {name: matrix.category_tokens(name)
                  for name in matrix.feature_names if matrix.is_categorical(name)}
    encoder: Encoder | None = None
    if spec.kind in TREE_KINDS:
        x = matrix.values
        mask = tuple(matrix.is_categorical(n) for n in matrix.feature_names)
        if spec.kind == "boosted_trees":
            inner = fit_boosted(x, y, mask, n_learners=int(hp["n_learners"]),
                                max_splits=int(hp["max_splits"]),
                                learning_rate=float(hp["learning_rate"]))
        else:
            inner = fit_tree(x, y, mask, max_splits=int(hp["max_splits"]))
    else:
        encoder = fit_encoder(matrix, zscore=spec.kind != "gaussian_nb")
        x = encoder.transform(matrix)
        if spec.kind == "quadratic_svm":
            inner = fit_svm(x, y, c=float(hp["c"]), tol=float(hp["tol"]),
                            max_iter=int(hp["max_iter"]))
        elif spec.kind == "knn":
            inner = fit_knn(x, y, k=int(hp["k"]))
        elif spec.kind == "gaussian_nb":
            inner = fit_gaussian_nb(x, y, var_floor=float(hp["var_floor"]))
        else:
            inner = fit_logistic(x, y.astype(float), l2=float(hp["l2"]),
                                 grad_tol=float(hp["grad_tol"]),
                                 max_iter=int(hp["max_iter"]))
    return TrainedModel(kind=spec.kind, spec=spec,
                        feature_names=matrix.feature_names,
                        categories=categories, encoder=encoder, inner=inner)


def predict(model: TrainedModel, matrix: FeatureMatrix) -> np.ndarray:
    missing = [n for n in model.feature_names if n not in matrix.feature_names]
    extra = [n for n in matrix.feature_names if n not in model.feature_names]
    if missing or extra:
        parts = []
        if missing:
            parts.append("missing columns: " + ", ".join(missing))
        if extra:
            parts.append("extra columns: " + ", ".join(extra))
        raise ModelError("schema mismatch: " + "; ".join(parts))
    rows = matrix
    if matrix.feature_names != model.feature_names:
        rows = matrix.select_features(model.feature_names)
    for name, tokens in model.categories.items():
        if rows.category_tokens(name) != tokens:
            raise ModelError(f"category table mismatch for column {name}")
    if model.encoder is None:
        x = rows.values
    else:
        x = model.encoder.transform(rows)
    return model.inner.predict(x).astype(np.int64)


from .evaluate import (  # noqa: E402  (needs the names defined above)
    EvaluationReport,
    accuracy_from_confusion,
    confusion_matrix,
    cross_validate,
    evaluate_holdout,
    format_report_summary,
    holdout_split,
    read_report,
    report_to_dict,
    run_experiment,
    write_report,
)

__all__ = [
    "MODEL_KINDS", "TREE_KINDS", "DEFAULT_HYPERPARAMETERS",
    "ModelError", "ModelSpec", "TrainedModel", "train_model", "predict",
    "EvaluationReport", "holdout_split", "cross_validate", "evaluate_holdout",
    "run_experiment", "confusion_matrix", "accuracy_from_confusion",
    "report_to_dict", "write_report", "read_report", "format_report_summary",
]
