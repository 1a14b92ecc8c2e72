"""k-nearest-neighbor voting on Euclidean distance.

Neighbor order is made deterministic with a stable argsort, so equidistant
points resolve by training-row index.  Vote ties go to class 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class KnnModel:
    train_x: np.ndarray
    train_y: np.ndarray
    k: int

    def predict(self, x: np.ndarray) -> np.ndarray:
        k = min(self.k, len(self.train_y))
        d2 = (np.sum(x * x, axis=1)[:, None]
              + np.sum(self.train_x * self.train_x, axis=1)[None, :]
              - 2.0 * x @ self.train_x.T)
        out = np.empty(len(x), dtype=np.int64)
        for i in range(len(x)):
            nearest = np.argsort(d2[i], kind="stable")[:k]
            votes = int(self.train_y[nearest].sum())
            out[i] = 1 if 2 * votes > k else 0
        return out


def fit_knn(x: np.ndarray, y: np.ndarray, k: int = 10) -> KnnModel:
    return KnnModel(train_x=x.copy(), train_y=y.copy(), k=k)
