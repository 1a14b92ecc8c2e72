"""Soft-margin SVM with the inhomogeneous quadratic kernel (1 + u.v)^2,
trained by sequential minimal optimization.

Each iteration optimizes the maximal-violating pair: the index pair whose
errors bound the bias term most tightly from below and above.  The loop
stops once the gap between those bounds is within the solver tolerance,
which caps the worst KKT violation at half the gap.  Pair choice uses
argmax/argmin over the error cache, so ties resolve to the lowest index
and refits on identical input are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def quad_kernel(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (1.0 + a @ b.T) ** 2


@dataclass
class QuadraticSvm:
    support_x: np.ndarray
    support_alpha_y: np.ndarray  # alpha_i * y_i for support vectors
    bias: float
    c: float
    converged: bool
    # full training state kept for optimality checks
    train_x: np.ndarray
    train_y: np.ndarray  # in {-1, +1}
    alpha: np.ndarray

    def decision_value(self, x: np.ndarray) -> np.ndarray:
        if len(self.support_x) == 0:
            return np.full(len(x), self.bias)
        return quad_kernel(x, self.support_x) @ self.support_alpha_y + self.bias

    def predict(self, x: np.ndarray) -> np.ndarray:
        return (self.decision_value(x) > 0.0).astype(np.int64)

    def kkt_residual(self) -> float:
        """Largest violation of the dual optimality conditions.

        alpha=0 requires y*f >= 1, interior alpha requires y*f = 1,
        alpha=C requires y*f <= 1; the residual is the worst slack.
        """
        f = self.decision_value(self.train_x)
        margin = self.train_y * f
        resid = 0.0
        for a, m in zip(self.alpha, margin):
            if a <= 1e-9:
                resid = max(resid, 1.0 - m)
            elif a >= self.c - 1e-9:
                resid = max(resid, m - 1.0)
            else:
                resid = max(resid, abs(m - 1.0))
        return float(resid)


def fit_svm(x: np.ndarray, y01: np.ndarray, c: float = 1.0, tol: float = 1e-3,
            max_iter: int = 200_000) -> QuadraticSvm:
    n = len(y01)
    y = (2.0 * y01 - 1.0).astype(float)
    k = quad_kernel(x, x)
    diag = np.diag(k).copy()
    alpha = np.zeros(n)
    # bias-free error cache: E_i = sum_j alpha_j y_j K_ij - y_i
    errors = -y.copy()
    converged = False
    snap = 1e-12 * c  # subtraction dust this close to a bound is the bound
    for _ in range(max_iter):
        # -E bounds the bias from below on I_up and above on I_low
        up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0.0))
        low = ((y < 0) & (alpha < c)) | ((y > 0) & (alpha > 0.0))
        neg_e = -errors
        i = int(np.argmax(np.where(up, neg_e, -np.inf)))
        j = int(np.argmin(np.where(low, neg_e, np.inf)))
        gap = neg_e[i] - neg_e[j]
        if gap <= tol:
            converged = True
            break
        ai, aj = alpha[i], alpha[j]
        yi, yj = y[i], y[j]
        if yi != yj:
            lo, hi = max(0.0, aj - ai), min(c, c + aj - ai)
        else:
            lo, hi = max(0.0, ai + aj - c), min(c, ai + aj)
        eta = diag[i] + diag[j] - 2.0 * k[i, j]
        if eta <= 0.0 or lo >= hi:
            break  # coincident points; no further progress possible
        aj_new = aj + yj * (errors[i] - errors[j]) / eta
        aj_new = min(max(aj_new, lo), hi)
        if aj_new < snap:
            aj_new = 0.0
        elif aj_new > c - snap:
            aj_new = c
        if aj_new == aj:
            break  # stalled at float precision
        ai_new = ai + yi * yj * (aj - aj_new)
        # clamp roundoff onto the box exactly
        ai_new = min(max(ai_new, 0.0), c)
        if ai_new < snap:
            ai_new = 0.0
        elif ai_new > c - snap:
            ai_new = c
        errors += yi * (ai_new - ai) * k[i] + yj * (aj_new - aj) * k[j]
        alpha[i], alpha[j] = ai_new, aj_new
    up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0.0))
    low = ((y < 0) & (alpha < c)) | ((y > 0) & (alpha > 0.0))
    neg_e = -errors
    bias = (np.max(neg_e[up]) + np.min(neg_e[low])) / 2.0
    sv = alpha > 1e-12
    return QuadraticSvm(support_x=x[sv].copy(), support_alpha_y=(alpha * y)[sv].copy(),
                        bias=float(bias), c=c, converged=converged,
                        train_x=x, train_y=y, alpha=alpha)
