"""MRMR feature ranking over discretized columns and context-based row filtering."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .features import FeatureMatrix

log = logging.getLogger(__name__)


class SelectionError(Exception):
    """Fatal problem while ranking features or filtering rows."""


@dataclass(frozen=True)
class DiscretizationSpec:
    bins: int = 16
    strategy: str = "quantile"

    def __post_init__(self) -> None:
        if self.bins < 2:
            raise ValueError("bins must be at least 2")
        if self.strategy not in ("quantile", "equal_width"):
            raise ValueError("strategy must be quantile or equal_width")


def discretize_column(values: np.ndarray, spec: DiscretizationSpec) -> np.ndarray:
    """Bin a continuous column into integer codes.

    quantile: interior edges at empirical quantiles, tied edges collapsed
    (fewer effective bins).  equal_width: uniform edges over [min, max].
    A constant column collapses to a single bin with a warning.
    """
    x = np.asarray(values, dtype=np.float64)
    if not np.isfinite(x).all():
        raise SelectionError("cannot discretize non-finite values")
    if len(x) == 0:
        return np.zeros(0, dtype=np.int64)
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        log.warning("constant column collapses to a single bin")
        return np.zeros(len(x), dtype=np.int64)
    if spec.strategy == "quantile":
        qs = np.arange(1, spec.bins) / spec.bins
        edges = np.unique(np.quantile(x, qs))
    else:
        edges = lo + np.arange(1, spec.bins) * (hi - lo) / spec.bins
    # side="left" counts edges strictly below the value, so a zero-heavy
    # column keeps its zeros separate from anything above a collapsed edge.
    return np.searchsorted(edges, x, side="left").astype(np.int64)


def mutual_information(x: np.ndarray, y: np.ndarray) -> float:
    """Plug-in MI in bits over the empirical joint distribution of two codes.

    Cell terms are summed with fsum so structurally identical joint tables
    give bit-identical results regardless of cell order (greedy tie-breaks
    downstream depend on that).
    """
    x = np.asarray(x)
    y = np.asarray(y)
    if len(x) != len(y):
        raise SelectionError(f"length mismatch: {len(x)} vs {len(y)}")
    n = len(x)
    if n == 0:
        return 0.0
    _, xi = np.unique(x, return_inverse=True)
    _, yi = np.unique(y, return_inverse=True)
    kx = int(xi.max()) + 1
    ky = int(yi.max()) + 1
    joint = np.bincount(xi * ky + yi, minlength=kx * ky).reshape(kx, ky)
    row = joint.sum(axis=1)
    col = joint.sum(axis=0)
    terms = []
    for i in range(kx):
        for j in range(ky):
            nxy = int(joint[i, j])
            if nxy == 0:
                continue
            p_xy = nxy / n
            p_x = int(row[i]) / n
            p_y = int(col[j]) / n
            terms.append(p_xy * math.log2(p_xy / (p_x * p_y)))
    return max(math.fsum(terms), 0.0)


@dataclass(frozen=True)
class MrmrRanking:
    """Greedy MRMR order with the score each feature had when picked."""

    entries: tuple[tuple[str, float], ...]
    scheme: str

    def __post_init__(self) -> None:
        names = [name for name, _ in self.entries]
        if len(set(names)) != len(names):
            raise SelectionError("ranking repeats a feature")

    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.entries)

    def top(self, k: int) -> tuple[str, ...]:
        return self.names()[:k]

    def score_of(self, name: str) -> float:
        for entry, score in self.entries:
            if entry == name:
                return score
        raise KeyError(name)


def _discretize_matrix(matrix: FeatureMatrix, spec: DiscretizationSpec) -> dict[str, np.ndarray]:
    out = {}
    for name in matrix.feature_names:
        col = matrix.column(name)
        if matrix.is_categorical(name):
            out[name] = col.astype(np.int64)  # categories keep their own codes
        else:
            out[name] = discretize_column(col, spec)
    return out


def mrmr_rank(matrix: FeatureMatrix, scheme: str = "miq",
              spec: DiscretizationSpec | None = None,
              labels: np.ndarray | None = None) -> MrmrRanking:
    """Greedy forward MRMR over all features of the matrix.

    First pick is the relevance argmax; later picks maximize V/W (miq, W
    floored at machine epsilon) or V-W (mid), W being the mean MI against the
    already-selected set.  Exact ties break by feature name.
    """
    if scheme not in ("miq", "mid"):
        raise SelectionError("scheme must be miq or mid")
    if len(matrix) < 2:
        raise SelectionError("need at least 2 rows to rank features")
    spec = spec or DiscretizationSpec()
    y = matrix.labels if labels is None else np.asarray(labels)
    codes = _discretize_matrix(matrix, spec)
    relevance = {name: mutual_information(codes[name], y) for name in matrix.feature_names}

    pair_cache: dict[tuple[str, str], float] = {}

    def pair_mi(a: str, b: str) -> float:
        key = (a, b) if a <= b else (b, a)
        if key not in pair_cache:
            pair_cache[key] = mutual_information(codes[a], codes[b])
        return pair_cache[key]

    remaining = sorted(matrix.feature_names)
    first = remaining[0]
    for name in remaining[1:]:  # strict > keeps the lexicographically first
        if relevance[name] > relevance[first]:
            first = name
    picked = [(first, relevance[first])]
    remaining.remove(first)
    eps = float(np.finfo(np.float64).eps)
    while remaining:
        selected = [name for name, _ in picked]
        best_name = None
        best_score = None
        for name in remaining:  # lexicographic scan; strict > keeps the first
            w = sum(pair_mi(name, s) for s in selected) / len(selected)
            if scheme == "miq":
                score = relevance[name] / max(w, eps)
            else:
                score = relevance[name] - w
            if best_score is None or score > best_score:
                best_name, best_score = name, score
        picked.append((best_name, float(best_score)))
        remaining.remove(best_name)
    return MrmrRanking(entries=tuple(picked), scheme=scheme)


@dataclass(frozen=True)
class ContextFilterRules:
    excluded_activities: frozenset[str] = frozenset({"sleeping", "movies", "meeting"})
    require_nonzero: frozenset[str] = frozenset({"steps_cumsum", "calories_cumsum"})
    activity_whitelist: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        overlap = self.excluded_activities & self.activity_whitelist
        if overlap:
            raise ValueError(f"whitelist and excluded activities overlap: {sorted(overlap)}")


def context_filter(matrix: FeatureMatrix, rules: ContextFilterRules) -> FeatureMatrix:
    """Drop windows with excluded/low-movement context, both hands together.

    A window goes when its activity is excluded (or missing from the
    whitelist, if one is set), or when any require_nonzero channel is zero on
    either hand.
    """
    act_tokens = matrix.category_tokens("activity")
    known = set(act_tokens)
    for token in sorted(rules.excluded_activities | rules.activity_whitelist):
        if token not in known:
            raise SelectionError(f"filter rule names unknown activity {token!r}")
    for channel in sorted(rules.require_nonzero):
        if channel not in matrix.feature_names:
            raise SelectionError(f"require_nonzero names unknown channel {channel!r}")

    n = len(matrix)
    drop = np.zeros(n, dtype=bool)
    activities = matrix.column("activity").astype(np.int64)
    for i in range(n):
        token = act_tokens[activities[i]]
        if token in rules.excluded_activities:
            drop[i] = True
        elif rules.activity_whitelist and token not in rules.activity_whitelist:
            drop[i] = True
    for channel in sorted(rules.require_nonzero):
        drop |= matrix.column(channel) == 0.0

    # either hand's violation drops the whole window
    dropped_windows = set(matrix.window_ids[drop].tolist())
    keep = np.array([int(w) not in dropped_windows for w in matrix.window_ids])
    if not keep.any():
        raise SelectionError("empty after context filter")
    out = matrix.subset_rows(keep)
    log.info("context filter kept %d of %d rows", len(out), n)
    return out


# ---------------------------------------------------------------------------
# Ranking persistence: CSV for pipelines, TSV for the bar-chart report
# ---------------------------------------------------------------------------

def write_ranking(ranking: MrmrRanking, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "feature", "score"])
        for i, (name, score) in enumerate(ranking.entries, start=1):
            writer.writerow([str(i), name, repr(float(score))])


def read_ranking(path: str | Path, scheme: str = "miq") -> MrmrRanking:
    path = Path(path)
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["rank", "feature", "score"]:
                raise SelectionError(f"{path}: not a ranking file")
            entries = tuple((row[1], float(row[2])) for row in reader)
    except OSError as exc:
        raise SelectionError(f"cannot read ranking {path}: {exc}") from exc
    return MrmrRanking(entries=entries, scheme=scheme)


def write_ranking_tsv(ranking: MrmrRanking, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["feature\tscore"]
    lines += [f"{name}\t{repr(float(score))}" for name, score in ranking.entries]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
