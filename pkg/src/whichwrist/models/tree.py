"""Binary classification trees grown by weighted Gini, plus an AdaBoost wrapper.

Trees are grown best-first: a global heap of candidate splits ordered by
impurity decrease, popping the largest until the split budget is spent.
A split is only accepted when it strictly reduces weighted Gini, so every
recorded split in a fitted tree carries a positive gain.

Categorical features split on subsets of category codes.  Candidate subsets
are prefixes of the codes ordered by their class-1 weight fraction, which is
optimal for binary Gini and keeps the scan linear in the number of codes.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field

import numpy as np

GAIN_EPS = 1e-12


@dataclass
class TreeNode:
    prediction: int
    n_samples: int
    feature: int | None = None
    threshold: float | None = None          # numeric split: x <= threshold goes left
    left_codes: frozenset[int] | None = None  # categorical split: code in set goes left
    gain: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


@dataclass
class DecisionTree:
    root: TreeNode
    categorical_mask: tuple[bool, ...]
    n_splits: int
    split_gains: tuple[float, ...]

    def predict(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(len(x), dtype=np.int64)
        for i, row in enumerate(x):
            node = self.root
            while not node.is_leaf:
                v = row[node.feature]
                if node.left_codes is not None:
                    node = node.left if int(v) in node.left_codes else node.right
                else:
                    node = node.left if v <= node.threshold else node.right
            out[i] = node.prediction
        return out


def _score(w0: np.ndarray, w1: np.ndarray) -> np.ndarray:
    """Sum over children of (per-class weight squared)/total, the quantity
    maximized by a Gini-minimizing split."""
    tot = w0 + w1
    with np.errstate(invalid="ignore", divide="ignore"):
        s = (w0 * w0 + w1 * w1) / tot
    return np.where(tot > 0.0, s, 0.0)


def _best_split(x: np.ndarray, y: np.ndarray, w: np.ndarray, idx: np.ndarray,
                categorical_mask: tuple[bool, ...]):
    """Best strict-gain split for the rows in idx, or None."""
    wi = w[idx]
    yi = y[idx]
    w1_tot = float(wi[yi == 1].sum())
    w0_tot = float(wi.sum()) - w1_tot
    parent = float(_score(np.array(w0_tot), np.array(w1_tot)))
    best = None  # (gain, feature, threshold, left_codes)
    for f in range(x.shape[1]):
        vals = x[idx, f]
        if categorical_mask[f]:
            codes = np.unique(vals.astype(np.int64))
            if len(codes) < 2:
                continue
            cw0 = np.zeros(len(codes))
            cw1 = np.zeros(len(codes))
            pos = np.searchsorted(codes, vals.astype(np.int64))
            np.add.at(cw0, pos[yi == 0], wi[yi == 0])
            np.add.at(cw1, pos[yi == 1], wi[yi == 1])
            frac1 = cw1 / (cw0 + cw1)
            order = np.lexsort((codes, frac1))  # fraction asc, code asc on ties
            l0 = np.cumsum(cw0[order])[:-1]
            l1 = np.cumsum(cw1[order])[:-1]
            gains = _score(l0, l1) + _score(w0_tot - l0, w1_tot - l1) - parent
            j = int(np.argmax(gains))
            if gains[j] > GAIN_EPS and (best is None or gains[j] > best[0]):
                left = frozenset(int(c) for c in codes[order][:j + 1])
                best = (float(gains[j]), f, None, left)
        else:
            order = np.argsort(vals, kind="stable")
            sv = vals[order]
            sw = wi[order]
            sy = yi[order]
            cut = np.nonzero(sv[:-1] < sv[1:])[0]
            if len(cut) == 0:
                continue
            c1 = np.cumsum(sw * (sy == 1))
            c0 = np.cumsum(sw) - c1
            l0, l1 = c0[cut], c1[cut]
            gains = _score(l0, l1) + _score(w0_tot - l0, w1_tot - l1) - parent
            j = int(np.argmax(gains))
            if gains[j] > GAIN_EPS and (best is None or gains[j] > best[0]):
                thr = float((sv[cut[j]] + sv[cut[j] + 1]) / 2.0)
                best = (float(gains[j]), f, thr, None)
    return best


def _leaf(y: np.ndarray, w: np.ndarray, idx: np.ndarray) -> TreeNode:
    w1 = float(w[idx][y[idx] == 1].sum())
    w0 = float(w[idx].sum()) - w1
    return TreeNode(prediction=1 if w1 > w0 else 0, n_samples=len(idx))


def fit_tree(x: np.ndarray, y: np.ndarray, categorical_mask: tuple[bool, ...],
             max_splits: int, sample_weight: np.ndarray | None = None) -> DecisionTree:
    if sample_weight is None:
        sample_weight = np.ones(len(y))
    w = sample_weight / sample_weight.sum()
    counter = itertools.count()  # heap tiebreak: earlier candidate wins
    heap: list = []

    def push(node: TreeNode, idx: np.ndarray) -> None:
        cand = _best_split(x, y, w, idx, categorical_mask)
        if cand is not None:
            heapq.heappush(heap, (-cand[0], next(counter), node, idx, cand))

    root = _leaf(y, w, np.arange(len(y)))
    push(root, np.arange(len(y)))
    n_splits = 0
    gains: list[float] = []
    while heap and n_splits < max_splits:
        _, _, node, idx, (gain, f, thr, codes) = heapq.heappop(heap)
        vals = x[idx, f]
        if codes is not None:
            mask = np.isin(vals.astype(np.int64), sorted(codes))
        else:
            mask = vals <= thr
        node.feature = f
        node.threshold = thr
        node.left_codes = codes
        node.gain = gain
        node.left = _leaf(y, w, idx[mask])
        node.right = _leaf(y, w, idx[~mask])
        n_splits += 1
        gains.append(gain)
        push(node.left, idx[mask])
        push(node.right, idx[~mask])
    return DecisionTree(root=root, categorical_mask=categorical_mask,
                        n_splits=n_splits, split_gains=tuple(gains))


@dataclass
class BoostedTrees:
    learners: list[DecisionTree] = field(default_factory=list)
    alphas: list[float] = field(default_factory=list)
    categorical_mask: tuple[bool, ...] = ()

    def decision_value(self, x: np.ndarray) -> np.ndarray:
        agg = np.zeros(len(x))
        for tree, alpha in zip(self.learners, self.alphas):
            agg += alpha * (2.0 * tree.predict(x) - 1.0)
        return agg

    def predict(self, x: np.ndarray) -> np.ndarray:
        return (self.decision_value(x) > 0.0).astype(np.int64)


def fit_boosted(x: np.ndarray, y: np.ndarray, categorical_mask: tuple[bool, ...],
                n_learners: int, max_splits: int, learning_rate: float) -> BoostedTrees:
    """AdaBoost over shallow Gini trees.

    Stops before adding a learner whose weighted error reaches 0.5, since such
    a learner carries no information about the labels.
    """
    w = np.ones(len(y)) / len(y)
    ysign = 2.0 * y - 1.0
    model = BoostedTrees(categorical_mask=categorical_mask)
    for _ in range(n_learners):
        tree = fit_tree(x, y, categorical_mask, max_splits, sample_weight=w)
        pred = tree.predict(x)
        err = float(w[pred != y].sum())
        if err >= 0.5:
            break
        err = max(err, 1e-10)
        alpha = learning_rate * 0.5 * np.log((1.0 - err) / err)
        model.learners.append(tree)
        model.alphas.append(alpha)
        w = w * np.exp(-alpha * ysign * (2.0 * pred - 1.0))
        w = w / w.sum()
    return model
