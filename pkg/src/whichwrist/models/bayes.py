"""Gaussian naive Bayes with a variance floor."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class GaussianNb:
    log_priors: np.ndarray      # (2,)
    means: np.ndarray           # (2, d)
    variances: np.ndarray       # (2, d), floored

    def log_joint(self, x: np.ndarray) -> np.ndarray:
        out = np.empty((len(x), 2))
        for c in range(2):
            diff = x - self.means[c]
            ll = -0.5 * (np.log(2.0 * np.pi * self.variances[c])
                         + diff * diff / self.variances[c])
            out[:, c] = self.log_priors[c] + ll.sum(axis=1)
        return out

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.log_joint(x), axis=1).astype(np.int64)


def fit_gaussian_nb(x: np.ndarray, y: np.ndarray,
                    var_floor: float = 1e-9) -> GaussianNb:
    n = len(y)
    log_priors = np.empty(2)
    means = np.empty((2, x.shape[1]))
    variances = np.empty((2, x.shape[1]))
    for c in range(2):
        rows = x[y == c]
        log_priors[c] = np.log(len(rows) / n)
        means[c] = rows.mean(axis=0)
        variances[c] = np.maximum(rows.var(axis=0), var_floor)
    return GaussianNb(log_priors=log_priors, means=means, variances=variances)
