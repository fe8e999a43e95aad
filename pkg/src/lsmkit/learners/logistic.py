"""Penalised logistic regression.

Objective: ``C * sum(log-loss) + penalty(w)`` with ``penalty = 0.5 * ||w||^2``
(l2) or ``||w||_1`` (l1); the intercept is never penalised.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import as_2d, check_binary, register, sigmoid


def _logloss_sum(y, z):
    # log(1 + e^z) - y z, computed stably
    return float(np.sum(np.logaddexp(0.0, z) - y * z))


@register("logistic")
@dataclass(eq=False)
class LogisticModel:
    weights: np.ndarray
    intercept: float
    penalty: str = "l2"
    C: float = 1.0
    converged: bool = True
    n_iter: int = 0

    def decision_function(self, X):
        X = as_2d(X, len(self.weights))
        return X @ self.weights + self.intercept

    def predict_proba(self, X):
        return sigmoid(self.decision_function(X))

    def get_params(self):
        return {"weights": self.weights, "intercept": self.intercept, "penalty": self.penalty,
                "C": self.C, "converged": self.converged, "n_iter": self.n_iter}

    @classmethod
    def from_params(cls, p):
        return cls(np.asarray(p["weights"], dtype=np.float64), p["intercept"], p["penalty"], p["C"],
                   p["converged"], p["n_iter"])


def _objective(X, y, w, b, C, penalty):
    reg = 0.5 * float(w @ w) if penalty == "l2" else float(np.abs(w).sum())
    return C * _logloss_sum(y, X @ w + b) + reg


def _fit_l2(X, y, C, max_iter, tol):
    n, f = X.shape
    A = np.column_stack([np.ones(n), X])
    theta = np.zeros(f + 1)
    reg = np.eye(f + 1)
    reg[0, 0] = 0.0
    obj = _objective(X, y, theta[1:], theta[0], C, "l2")
    for it in range(1, max_iter + 1):
        z = A @ theta
        p = sigmoid(z)
        grad = C * (A.T @ (p - y)) + reg @ theta
        wts = C * p * (1 - p)
        H = (A * wts[:, None]).T @ A + reg
        H[0, 0] += 1e-12 * max(1.0, C * n)
        step = np.linalg.solve(H, grad)
        t = 1.0
        while True:
            cand = theta - t * step
            new_obj = _objective(X, y, cand[1:], cand[0], C, "l2")
            if new_obj <= obj - 1e-4 * t * float(grad @ step) or t < 1e-10:
                break
            t *= 0.5
        delta = np.abs(cand - theta).max()
        theta, obj = cand, new_obj
        if delta < tol:
            return theta, True, it
    return theta, False, max_iter


def _fit_l1(X, y, C, max_iter, tol, inner_sweeps=200):
    n, f = X.shape
    w = np.zeros(f)
    b = 0.0
    obj = _objective(X, y, w, b, C, "l1")
    for it in range(1, max_iter + 1):
        z = X @ w + b
        p = sigmoid(z)
        g_b = C * float(np.sum(p - y))
        g_w = C * (X.T @ (p - y))
        h = np.maximum(C * p * (1 - p), 1e-12 * C)
        h_bb = float(h.sum())
        h_jj = (X ** 2).T @ h + 1e-12
        # coordinate descent on the local quadratic model plus the l1 term
        d_b = 0.0
        d_w = np.zeros(f)
        r = np.zeros(n)  # X d_w + d_b
        for _ in range(inner_sweeps):
            biggest = 0.0
            step = -(g_b + float(h @ r)) / h_bb
            d_b += step
            r += step
            biggest = max(biggest, abs(step))
            for j in range(f):
                xj = X[:, j]
                grad_j = g_w[j] + float(xj @ (h * r))
                cur = w[j] + d_w[j]
                zj = cur - grad_j / h_jj[j]
                new = np.sign(zj) * max(abs(zj) - 1.0 / h_jj[j], 0.0)
                change = new - cur
                if change != 0.0:
                    d_w[j] += change
                    r += change * xj
                    biggest = max(biggest, abs(change))
            if biggest < tol * 1e-2:
                break
        decrease = g_b * d_b + float(g_w @ d_w) + float(np.abs(w + d_w).sum() - np.abs(w).sum())
        t = 1.0
        while True:
            nw, nb = w + t * d_w, b + t * d_b
            new_obj = _objective(X, y, nw, nb, C, "l1")
            if new_obj <= obj + 1e-4 * t * decrease or t < 1e-10:
                break
            t *= 0.5
        delta = max(np.abs(nw - w).max(initial=0.0), abs(nb - b))
        w, b, obj = nw, nb, new_obj
        if delta < tol:
            return np.concatenate([[b], w]), True, it
    return np.concatenate([[b], w]), False, max_iter


def train_logistic(X, y, *, C=1.0, penalty="l2", max_iter=200, tol=1e-8) -> LogisticModel:
    """Fit penalised logistic regression on (already standardized) rows ``X``.

    Converged when the largest parameter update falls below ``tol``;
    ``converged`` is False when ``max_iter`` was hit first.
    """
    X = np.asarray(X, dtype=np.float64)
    y = check_binary(y)
    if not C > 0:
        raise ValueError("C must be positive")
    if penalty == "l2":
        theta, ok, it = _fit_l2(X, y, C, max_iter, tol)
    elif penalty == "l1":
        theta, ok, it = _fit_l1(X, y, C, max_iter, tol)
    else:
        raise ValueError(f"penalty must be 'l1' or 'l2', not {penalty!r}")
    return LogisticModel(theta[1:].copy(), float(theta[0]), penalty, float(C), ok, it)
