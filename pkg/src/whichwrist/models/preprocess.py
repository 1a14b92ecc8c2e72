"""Design-matrix encoding for the kernel/distance/linear models.

Categorical features expand to one-hot columns over their full token table
(so train and predict agree on width); continuous features are optionally
z-scored with training-split statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..features import FeatureMatrix


@dataclass
class Encoder:
    feature_names: tuple[str, ...]
    categorical: dict[str, tuple[str, ...]]
    zscore: bool
    means: dict[str, float]
    stds: dict[str, float]

    @property
    def column_names(self) -> tuple[str, ...]:
        cols: list[str] = []
        for name in self.feature_names:
            if name in self.categorical:
                cols.extend(f"{name}={tok}" for tok in self.categorical[name])
            else:
                cols.append(name)
        return tuple(cols)

    def transform(self, matrix: FeatureMatrix) -> np.ndarray:
        blocks = []
        for name in self.feature_names:
            col = matrix.column(name)
            if name in self.categorical:
                width = len(self.categorical[name])
                onehot = np.zeros((len(col), width))
                onehot[np.arange(len(col)), col.astype(np.int64)] = 1.0
                blocks.append(onehot)
            elif self.zscore:
                blocks.append(((col - self.means[name]) / self.stds[name])[:, None])
            else:
                blocks.append(col[:, None])
        return np.hstack(blocks)


def fit_encoder(matrix: FeatureMatrix, zscore: bool) -> Encoder:
    means: dict[str, float] = {}
    stds: dict[str, float] = {}
    categorical = {name: matrix.category_tokens(name)
                   for name in matrix.feature_names if matrix.is_categorical(name)}
    if zscore:
        for name in matrix.feature_names:
            if name in categorical:
                continue
            col = matrix.column(name)
            means[name] = float(col.mean())
            std = float(col.std())
            stds[name] = std if std > 0.0 else 1.0  # constant column stays constant
    return Encoder(feature_names=matrix.feature_names, categorical=categorical,
                   zscore=zscore, means=means, stds=stds)
