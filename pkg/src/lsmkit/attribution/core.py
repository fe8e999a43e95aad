"""Attribution records, model adapters and CSV export."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ..data import FactorTable
from ..learners.base import TrainedModel

METHODS = ("Shapley-exact", "Shapley-sampled", "LIME", "DeepLIFT")
ATTRIBUTION_COLUMNS = ("instance_id", "model", "method", "factor", "phi", "baseline", "seed")


@dataclass(frozen=True, eq=False)
class Attribution:
    """Per-factor contributions for one instance under one (model, method)."""

    factors: tuple
    phi: np.ndarray
    baseline: float
    method: str
    model_id: str = ""
    instance_id: str = ""
    seed: int | None = None
    output: float | None = None  # model output at the explained instance

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=np.float64)
        if phi.shape != (len(self.factors),):
            raise ValueError("one contribution per factor is required")
        if not np.all(np.isfinite(phi)):
            raise ValueError("contributions must be finite")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        object.__setattr__(self, "phi", phi)

    def top_k(self, k=3) -> tuple:
        """Factors with the largest |contribution|, ties kept in factor order."""
        order = np.argsort(-np.abs(self.phi), kind="stable")
        return tuple(self.factors[i] for i in order[:k])


def scorer(model):
    """Batch scoring function for a model object or a plain callable."""
    if hasattr(model, "predict_proba"):
        return model.predict_proba
    if callable(model):
        return lambda X: np.asarray(model(X), dtype=np.float64).reshape(len(X))
    raise TypeError("model must expose predict_proba or be callable")


def model_name(model, given=None) -> str:
    if given:
        return given
    return str(getattr(model, "kind", getattr(model, "__name__", type(model).__name__)))


def factor_names(model, f, given=None) -> tuple:
    if given is not None:
        names = tuple(given)
    elif isinstance(model, TrainedModel):
        names = tuple(model.factors)
    else:
        names = tuple(f"x{i + 1}" for i in range(f))
    if len(names) != f:
        raise ValueError(f"{len(names)} factor names for {f} factors")
    return names


def as_rows(background) -> np.ndarray:
    rows = background.rows if isinstance(background, FactorTable) else background
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim == 1:
        rows = rows[None, :]
    if rows.ndim != 2 or len(rows) == 0:
        raise ValueError("background must be a non-empty set of rows")
    return rows


def background_sample(table, size=100, seed=0) -> np.ndarray:
    """Seeded subset of rows used as the replacement distribution for absent factors."""
    rows = as_rows(table)
    if len(rows) <= size:
        return rows.copy()
    idx = np.sort(np.random.default_rng(seed).choice(len(rows), size, replace=False))
    return rows[idx]


def _fmt(v):
    return "" if v is None else repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_attributions(attributions, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ATTRIBUTION_COLUMNS)
        for a in attributions:
            for name, phi in zip(a.factors, a.phi):
                w.writerow([a.instance_id, a.model_id, a.method, name, repr(float(phi)),
                            repr(float(a.baseline)), _fmt(a.seed)])
