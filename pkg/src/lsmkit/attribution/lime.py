"""Local linear surrogates fitted on Gaussian perturbations around one instance."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..learners.base import TrainedModel
from .core import Attribution, factor_names, model_name, scorer

_MAX_CONDITION = 1e12


@dataclass(frozen=True)
class LimeConfig:
    """Surrogate settings; ``kernel_width`` None means 0.75 * sqrt(f)."""

    n_perturbations: int = 5000
    kernel_width: float | None = None
    perturbation_scale: float = 1.0
    ridge: float = 1e-3

    def __post_init__(self):
        if self.n_perturbations < 1:
            raise ValueError("n_perturbations must be positive")
        if self.kernel_width is not None and not self.kernel_width > 0:
            raise ValueError("kernel_width must be positive")
        if not self.perturbation_scale > 0:
            raise ValueError("perturbation_scale must be positive")
        if not self.ridge > 0:
            raise ValueError("ridge must be positive")

    def width(self, f) -> float:
        return 0.75 * np.sqrt(f) if self.kernel_width is None else float(self.kernel_width)


def weighted_ridge(Z, y, w, ridge):
    """Minimise sum w (y - b0 - Z b)^2 + ridge |b|^2; returns (b0, b)."""
    A = np.column_stack([np.ones(len(Z)), Z])
    AtW = A.T * w
    M = AtW @ A
    M[1:, 1:] += ridge * np.eye(Z.shape[1])
    if not np.isfinite(M).all() or w.sum() <= 0 or np.linalg.cond(M) > _MAX_CONDITION:
        raise np.linalg.LinAlgError("weighted surrogate design is singular; widen the kernel or "
                                    "increase the perturbation scale")
    coef = np.linalg.solve(M, AtW @ y)
    return float(coef[0]), coef[1:]


def snap_to_codes(values, codes) -> np.ndarray:
    """Replace each value by the nearest allowed code (lower code on exact ties)."""
    codes = np.unique(np.asarray(codes, dtype=np.float64))
    v = np.asarray(values, dtype=np.float64)
    hi = np.clip(np.searchsorted(codes, v), 1, len(codes) - 1) if len(codes) > 1 else np.zeros(v.shape, int)
    if len(codes) == 1:
        return np.full(v.shape, codes[0])
    lo = hi - 1
    return np.where(v - codes[lo] <= codes[hi] - v, codes[lo], codes[hi])


def lime_explain(model, x, config: LimeConfig | None = None, seed=0, *, factors=None, model_id=None,
                 instance_id="", perturbation_std=None, categories=None) -> Attribution:
    """Fit a proximity-weighted ridge surrogate around ``x`` and return its slopes.

    Perturbations are drawn in standardised units: for a wrapped model with
    a scaler, noise is added to the scaled instance and mapped back before
    scoring, so slopes are per standard deviation of each factor.
    ``perturbation_std`` optionally gives a per-factor noise stddev for
    unwrapped models whose inputs are not standardised. ``categories`` maps
    a column index to its allowed codes; perturbed values in that column are
    snapped to the nearest code before scoring while the surrogate still
    regresses on the continuous offsets.
    """
    config = config or LimeConfig()
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("lime_explain takes a single instance")
    f = len(x)
    score = scorer(model)
    scaler = model.scaler if isinstance(model, TrainedModel) else None
    if scaler is not None:
        centre = scaler.transform(x[None, :])[0]
        to_model = scaler.inverse_transform
    else:
        unit = np.ones(f) if perturbation_std is None else np.asarray(perturbation_std, dtype=np.float64)
        centre = x / unit
        to_model = lambda Z: Z * unit  # noqa: E731
    rng = np.random.default_rng(seed)
    offsets = rng.normal(0.0, config.perturbation_scale, size=(config.n_perturbations, f))
    rows = to_model(centre + offsets)
    for j, codes in (categories or {}).items():
        rows[:, j] = snap_to_codes(rows[:, j], codes)
    y = score(rows)
    w = np.exp(-np.sum(offsets ** 2, axis=1) / config.width(f) ** 2)
    intercept, slopes = weighted_ridge(offsets, y, w, config.ridge)
    return Attribution(factor_names(model, f, factors), slopes, intercept, "LIME", model_name(model, model_id),
                       instance_id, int(seed), float(score(x[None, :])[0]))
