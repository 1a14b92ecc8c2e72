"""L2-regularized logistic regression fit by damped Newton iterations.

The loss/gradient pair is exposed separately so optimality can be checked
numerically against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def add_intercept(x: np.ndarray) -> np.ndarray:
    return np.hstack([np.ones((len(x), 1)), x])


def logistic_loss(weights: np.ndarray, x: np.ndarray, y: np.ndarray,
                  l2: float) -> float:
    """Total negative log-likelihood plus (l2/2)*||w||^2, intercept excluded
    from the penalty.  x must already carry the intercept column."""
    z = x @ weights
    nll = float(np.sum(np.logaddexp(0.0, z) - y * z))
    return nll + 0.5 * l2 * float(weights[1:] @ weights[1:])


def logistic_gradient(weights: np.ndarray, x: np.ndarray, y: np.ndarray,
                      l2: float) -> np.ndarray:
    z = x @ weights
    p = 1.0 / (1.0 + np.exp(-z))
    grad = x.T @ (p - y)
    grad[1:] += l2 * weights[1:]
    return grad


@dataclass
class LogisticModel:
    weights: np.ndarray  # intercept first
    converged: bool

    def decision_value(self, x: np.ndarray) -> np.ndarray:
        return add_intercept(x) @ self.weights

    def predict(self, x: np.ndarray) -> np.ndarray:
        return (self.decision_value(x) > 0.0).astype(np.int64)


def fit_logistic(x: np.ndarray, y: np.ndarray, l2: float = 1e-4,
                 grad_tol: float = 1e-8, max_iter: int = 100) -> LogisticModel:
    xi = add_intercept(x)
    d = xi.shape[1]
    w = np.zeros(d)
    loss = logistic_loss(w, xi, y, l2)
    converged = False
    for _ in range(max_iter):
        grad = logistic_gradient(w, xi, y, l2)
        if float(np.max(np.abs(grad))) <= grad_tol:
            converged = True
            break
        z = xi @ w
        p = 1.0 / (1.0 + np.exp(-z))
        s = p * (1.0 - p)
        hess = xi.T @ (xi * s[:, None])
        hess[1:, 1:] += l2 * np.eye(d - 1)
        hess += 1e-12 * np.eye(d)  # keep the solve well-posed on separable data
        step = np.linalg.solve(hess, grad)
        # halve the step until the loss actually drops
        scale = 1.0
        for _ in range(40):
            w_new = w - scale * step
            loss_new = logistic_loss(w_new, xi, y, l2)
            if loss_new < loss:
                break
            scale /= 2.0
        else:
            converged = True  # no descent direction left at float precision
            break
        w, loss = w_new, loss_new
    return LogisticModel(weights=w, converged=converged)
