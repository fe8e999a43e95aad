"""Multicollinearity screening (VIF) and OLS coefficient significance."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .data import FactorTable


def _betacf(a, b, x, max_iter=20000, eps=1e-16):
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc_reg(a, b, x):
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t, dof):
    """P(|T| >= |t|) for Student's t with ``dof`` degrees of freedom."""
    if math.isnan(t):
        return math.nan
    if math.isinf(t):
        return 0.0
    return betainc_reg(dof / 2.0, 0.5, dof / (dof + t * t))


def t_cdf(t, dof):
    p = t_two_sided_p(t, dof) / 2.0
    return 1.0 - p if t > 0 else p


@dataclass(frozen=True, eq=False)
class VifReport:
    factors: tuple
    vif: np.ndarray
    threshold: float = 10.0

    @property
    def flagged(self) -> tuple:
        return tuple(f for f, v in zip(self.factors, self.vif) if v >= self.threshold)

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["Factor", "VIF", "flagged"])
            for f, v in zip(self.factors, self.vif):
                w.writerow([f, repr(float(v)), int(v >= self.threshold)])


def _scaled_design(X):
    X = np.asarray(X, dtype=np.float64)
    centered = X - X.mean(axis=0)
    scale = np.sqrt((centered ** 2).sum(axis=0))
    return centered, scale


def _dependent_columns(names, X):
    centered, scale = _scaled_design(X)
    const = scale == 0
    if np.any(const):
        return [n for n, c in zip(names, const) if c]
    Z = centered / scale
    _, s, vt = np.linalg.svd(Z, full_matrices=False)
    tol = s.max() * max(Z.shape) * np.finfo(float).eps
    null = vt[s <= tol]
    involved = np.any(np.abs(null) > 1e-8, axis=0)
    return [n for n, flag in zip(names, involved) if flag]


def vif(table: FactorTable, threshold=10.0) -> VifReport:
    """Variance inflation factor of every factor against all the others."""
    X = table.rows
    n, f = X.shape
    if f < 2:
        return VifReport(table.names, np.ones(f), threshold)
    if n <= f + 1:
        raise ValueError(f"VIF needs more rows ({n}) than factors + 1 ({f + 1})")
    dep = _dependent_columns(table.names, X)
    if dep:
        raise ValueError(f"singular design; linearly dependent or constant columns: {dep}")
    out = np.empty(f)
    for j in range(f):
        y = X[:, j]
        others = np.column_stack([np.ones(n), np.delete(X, j, axis=1)])
        q, r = np.linalg.qr(others)
        resid = y - q @ (q.T @ y)
        tss = ((y - y.mean()) ** 2).sum()
        r2 = 1.0 - (resid @ resid) / tss
        out[j] = 1.0 / (1.0 - r2)
    return VifReport(table.names, out, threshold)


@dataclass(frozen=True, eq=False)
class OlsReport:
    terms: tuple
    coefficient: np.ndarray
    standard_error: np.ndarray
    t_statistic: np.ndarray
    p_value: np.ndarray
    n: int
    f: int
    residual_variance: float
    rss: float
    degenerate: bool = False

    def row(self, term):
        i = self.terms.index(term)
        return (self.coefficient[i], self.standard_error[i], self.t_statistic[i], self.p_value[i])

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["", "Coefficient", "Standard Error", "t-statistic", "P-value"])
            for i, term in enumerate(self.terms):
                w.writerow([term] + [repr(float(v)) for v in
                                     (self.coefficient[i], self.standard_error[i],
                                      self.t_statistic[i], self.p_value[i])])


def ols_regression(table: FactorTable, labels=None, *, standardize=False) -> OlsReport:
    """Least-squares fit of labels on factors with intercept, plus t-tests.

    Factors stay in raw units unless ``standardize`` is set. A binary
    response makes this a linear probability model.
    """
    y = np.asarray(table.labels if labels is None else labels, dtype=np.float64)
    X = table.rows
    if standardize:
        sd = X.std(axis=0)
        if np.any(sd == 0):
            raise ValueError("cannot standardize a constant factor")
        X = (X - X.mean(axis=0)) / sd
    n, f = X.shape
    if y.shape != (n,):
        raise ValueError("labels must have one entry per row")
    if n <= f + 1:
        raise ValueError(f"OLS needs more rows ({n}) than factors + 1 ({f + 1})")
    A = np.column_stack([np.ones(n), X])
    q, r = np.linalg.qr(A)
    diag = np.abs(np.diag(r))
    if diag.min() <= diag.max() * max(A.shape) * np.finfo(float).eps:
        dep = _dependent_columns(table.names, X)
        raise ValueError(f"rank-deficient design; dependent columns: {dep or 'intercept'}")
    beta = solve_triangular(r, q.T @ y)
    resid = y - A @ beta
    rss = float(resid @ resid)
    dof = n - f - 1
    sigma2 = rss / dof
    r_inv = solve_triangular(r, np.eye(f + 1))
    se = np.sqrt(sigma2 * (r_inv ** 2).sum(axis=1))
    degenerate = rss <= (1e-12 * max(1.0, float(np.abs(y).max()))) ** 2 * n
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, beta / np.where(se > 0, se, 1.0), np.nan)
    if degenerate:
        p = np.zeros(f + 1)
    else:
        p = np.array([t_two_sided_p(float(v), dof) for v in t])
    return OlsReport(("Intercept",) + table.names, beta, se, t, p, n, f, sigma2, rss, bool(degenerate))
