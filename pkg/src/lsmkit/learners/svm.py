"""C-SVC trained with sequential minimal optimisation, with Platt-scaled scores.

Dual: minimise 0.5 a'Qa - sum(a) subject to 0 <= a_i <= C and y'a = 0,
where Q_ij = y_i y_j k(x_i, x_j). Pairs are chosen with the second-order
working-set rule; training stops when the maximal KKT violation
m(a) - M(a) drops below ``tol``.
"""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from ..data import stratified_folds
from .base import as_2d, check_binary, register

KERNELS = ("linear", "poly", "rbf")
_TAU = 1e-12


def median_distance(X, max_rows=1000, seed=0):
    """Median pairwise Euclidean distance, on a seeded subset for large inputs."""
    X = np.asarray(X, dtype=np.float64)
    if len(X) > max_rows:
        X = X[np.random.default_rng(seed).choice(len(X), max_rows, replace=False)]
    sq = (X ** 2).sum(axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2 * X @ X.T, 0.0)
    iu = np.triu_indices(len(X), k=1)
    med = float(np.median(np.sqrt(d2[iu]))) if len(iu[0]) else 1.0
    return med if med > 0 else 1.0


def kernel_matrix(A, B, kernel, sigma=1.0, degree=3):
    """k(a, b) for all rows of A against all rows of B."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if kernel == "rbf":
        d2 = (A ** 2).sum(axis=1)[:, None] + (B ** 2).sum(axis=1)[None, :] - 2.0 * (A @ B.T)
        return np.exp(-np.maximum(d2, 0.0) / (2.0 * sigma * sigma))
    if kernel == "linear":
        return A @ B.T
    if kernel == "poly":
        return (A @ B.T / A.shape[1] + 1.0) ** degree
    raise ValueError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")


class _KernelColumns:
    def __init__(self, X, kernel, sigma, degree, cache_size=4000):
        self.X = X
        self.kernel = kernel
        self.sigma = sigma
        self.degree = degree
        self.cache = OrderedDict()
        self.cache_size = cache_size
        self.sq = (X ** 2).sum(axis=1)
        if kernel == "rbf":
            self.diag = np.ones(len(X))
        elif kernel == "linear":
            self.diag = self.sq.copy()
        else:
            self.diag = (self.sq / X.shape[1] + 1.0) ** degree

    def __call__(self, i):
        col = self.cache.get(i)
        if col is not None:
            self.cache.move_to_end(i)
            return col
        X = self.X
        if self.kernel == "rbf":
            d2 = np.maximum(self.sq + self.sq[i] - 2.0 * (X @ X[i]), 0.0)
            col = np.exp(-d2 / (2.0 * self.sigma * self.sigma))
        elif self.kernel == "linear":
            col = X @ X[i]
        else:
            col = (X @ X[i] / X.shape[1] + 1.0) ** self.degree
        self.cache[i] = col
        if len(self.cache) > self.cache_size:
            self.cache.popitem(last=False)
        return col


def smo(X, y, C, kernel="rbf", sigma=1.0, degree=3, tol=1e-3, max_iter=None):
    """Solve the C-SVC dual. ``y`` in {-1, +1}. Returns (alpha, bias, converged, n_iter, gap)."""
    n = len(y)
    K = _KernelColumns(X, kernel, sigma, degree)
    alpha = np.zeros(n)
    grad = -np.ones(n)
    max_iter = max_iter or max(100_000, 100 * n)
    pos = y > 0
    gap = np.inf
    it = 0
    converged = False
    while it < max_iter:
        v = -y * grad
        up = (pos & (alpha < C)) | (~pos & (alpha > 0))
        low = (pos & (alpha > 0)) | (~pos & (alpha < C))
        if not up.any() or not low.any():
            converged = True
            gap = 0.0
            break
        v_up = np.where(up, v, -np.inf)
        i = int(np.argmax(v_up))
        m = v_up[i]
        M = float(np.min(np.where(low, v, np.inf)))
        gap = m - M
        if gap < tol:
            converged = True
            break
        Ki = K(i)
        b = m - v
        cand = low & (b > 0)
        a = K.diag[i] + K.diag - 2.0 * Ki
        a = np.where(a > 0, a, _TAU)
        score = np.where(cand, -(b * b) / a, np.inf)
        j = int(np.argmin(score))
        Kj = K(j)
        step = b[j] / a[j]
        lim_i = C - alpha[i] if y[i] > 0 else alpha[i]
        lim_j = alpha[j] if y[j] > 0 else C - alpha[j]
        step = min(step, lim_i, lim_j)
        old_i, old_j = alpha[i], alpha[j]
        new_i = old_i + y[i] * step
        new_j = old_j - y[j] * step
        # snap onto the box to keep constraints exact
        if step == lim_i:
            new_i = C if y[i] > 0 else 0.0
        if step == lim_j:
            new_j = 0.0 if y[j] > 0 else C
        alpha[i], alpha[j] = new_i, new_j
        d_i, d_j = new_i - old_i, new_j - old_j
        grad += y * (y[i] * d_i * Ki + y[j] * d_j * Kj)
        it += 1
    free = (alpha > 0) & (alpha < C)
    if free.any():
        bias = float(np.mean(-y[free] * grad[free]))
    else:
        v = -y * grad
        up = (pos & (alpha < C)) | (~pos & (alpha > 0))
        low = (pos & (alpha > 0)) | (~pos & (alpha < C))
        hi = np.max(v[up]) if up.any() else 0.0
        lo = np.min(v[low]) if low.any() else 0.0
        bias = float((hi + lo) / 2.0)
    return alpha, bias, converged, it, float(gap)


def fit_platt(f, y, max_iter=100):
    """Fit P(y=1|f) = 1 / (1 + exp(A f + B)) by Newton's method with regularised targets."""
    f = np.asarray(f, dtype=np.float64)
    y = np.asarray(y)
    n_pos = int((y == 1).sum())
    n_neg = len(y) - n_pos
    t = np.where(y == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    A, B = 0.0, np.log((n_neg + 1.0) / (n_pos + 1.0))

    def objective(A, B):
        z = A * f + B
        return float(np.sum(t * z + np.logaddexp(0.0, -z)))

    obj = objective(A, B)
    for _ in range(max_iter):
        z = A * f + B
        p = 1.0 / (1.0 + np.exp(np.clip(z, -700, 700)))  # P(y=1)
        d1 = t - p
        d2 = p * (1 - p)
        g1 = float(f @ d1)
        g2 = float(d1.sum())
        h11 = float((f * f) @ d2) + 1e-12
        h22 = float(d2.sum()) + 1e-12
        h21 = float(f @ d2)
        if abs(g1) < 1e-5 and abs(g2) < 1e-5:
            break
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= 1e-10:
            nA, nB = A + step * dA, B + step * dB
            new = objective(nA, nB)
            if new < obj + 1e-4 * step * gd:
                A, B, obj = nA, nB, new
                break
            step /= 2.0
        else:
            break
    return A, B


@register("svm")
@dataclass(eq=False)
class SvmModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float
    kernel: str
    sigma: float
    C: float
    degree: int = 3
    platt_a: float = -1.0
    platt_b: float = 0.0
    converged: bool = True
    n_iter: int = 0
    kkt_gap: float = 0.0
    training_slack: float = 0.0

    def decision_function(self, X):
        X = as_2d(X, self.support_vectors.shape[1])
        out = np.empty(len(X))
        for start in range(0, len(X), 2048):
            chunk = X[start:start + 2048]
            K = kernel_matrix(chunk, self.support_vectors, self.kernel, self.sigma, self.degree)
            out[start:start + 2048] = K @ self.dual_coef + self.bias
        return out

    def predict_proba(self, X):
        z = self.platt_a * self.decision_function(X) + self.platt_b
        return 1.0 / (1.0 + np.exp(np.clip(z, -700, 700)))

    def get_params(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_params(cls, p):
        p = dict(p)
        p["support_vectors"] = np.asarray(p["support_vectors"], dtype=np.float64)
        p["dual_coef"] = np.asarray(p["dual_coef"], dtype=np.float64)
        return cls(**p)


def _fit_dual(X, y01, C, kernel, sigma, degree, tol):
    y = np.where(y01 > 0, 1.0, -1.0)
    alpha, bias, ok, it, gap = smo(X, y, C, kernel, sigma, degree, tol)
    sv = alpha > 0
    return alpha, y, sv, bias, ok, it, gap


def train_svm(X, y, *, C=5.0, kernel="rbf", sigma=None, degree=3, tol=1e-3,
              platt_folds=3, seed=0) -> SvmModel:
    """Fit a C-SVC and calibrate its decision values into probabilities.

    ``sigma`` defaults to the median pairwise distance. Platt parameters are
    fitted on out-of-fold decision values from ``platt_folds`` internal
    folds (0 fits them on the training decision values instead).
    """
    X = np.asarray(X, dtype=np.float64)
    y01 = check_binary(y)
    if kernel not in KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")
    if not C > 0:
        raise ValueError("C must be positive")
    if sigma is None:
        sigma = median_distance(X, seed=seed)
    alpha, ys, sv, bias, ok, it, gap = _fit_dual(X, y01, C, kernel, sigma, degree, tol)
    model = SvmModel(X[sv].copy(), (alpha * ys)[sv].copy(), bias, kernel, float(sigma), float(C),
                     int(degree), converged=ok, n_iter=it, kkt_gap=gap)
    train_dec = model.decision_function(X)
    model.training_slack = float(np.maximum(0.0, 1.0 - ys * train_dec).sum())

    if platt_folds and platt_folds >= 2 and min(y01.sum(), len(y01) - y01.sum()) >= platt_folds:
        folds = stratified_folds(y01, platt_folds, seed)
        oof = np.empty(len(X))
        for k in range(platt_folds):
            tr, te = folds != k, folds == k
            a_k, ys_k, sv_k, b_k, *_ = _fit_dual(X[tr], y01[tr], C, kernel, sigma, degree, tol)
            sub = SvmModel(X[tr][sv_k], (a_k * ys_k)[sv_k], b_k, kernel, float(sigma), float(C), int(degree))
            oof[te] = sub.decision_function(X[te])
        model.platt_a, model.platt_b = fit_platt(oof, y01)
    else:
        model.platt_a, model.platt_b = fit_platt(train_dec, y01)
    return model
