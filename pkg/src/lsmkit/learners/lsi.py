"""Class-weight (IV, WoE, FR) susceptibility index as a scoring model.

The raw index is the sum over factors of the weight of the class each value
falls in. A one-dimensional logistic fit on the training index maps it to
[0, 1] so the index shares the probability interface of the other learners;
the map is monotone, so rankings and AUC are those of the raw index.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..bivariate import LSI_MODELS, compute_class_counts, score_lsi_rows, weight_table
from ..data import ClassBinning, FactorTable, bin_factor
from ..factors import CATEGORICAL
from .base import as_2d, register, sigmoid
from .logistic import train_logistic


@register("lsi")
@dataclass(eq=False)
class LsiModel:
    method: str
    binnings: tuple          # ClassBinning per factor, table order
    weights: tuple           # weight array per factor, one entry per class
    slope: float = 1.0
    intercept: float = 0.0

    @property
    def names(self) -> tuple:
        return tuple(b.factor for b in self.binnings)

    def lsi(self, X) -> np.ndarray:
        X = as_2d(X, len(self.binnings))
        total = np.zeros(len(X))
        for j, (b, w) in enumerate(zip(self.binnings, self.weights)):
            total += w[b.assign(X[:, j])]
        return total

    def decision_function(self, X):
        return self.slope * self.lsi(X) + self.intercept

    def predict_proba(self, X):
        return sigmoid(self.decision_function(X))

    def get_params(self):
        return {"method": self.method, "slope": self.slope, "intercept": self.intercept,
                "weights": [np.asarray(w) for w in self.weights],
                "binnings": [{"factor": b.factor, "edges": list(b.edges), "class_labels": list(b.class_labels),
                              "kind": b.kind} for b in self.binnings]}

    @classmethod
    def from_params(cls, p):
        binnings = tuple(ClassBinning(d["factor"], tuple(d["edges"]), tuple(d["class_labels"]), d["kind"])
                         for d in p["binnings"])
        weights = tuple(np.asarray(w, dtype=np.float64) for w in p["weights"])
        return cls(p["method"], binnings, weights, float(p["slope"]), float(p["intercept"]))


def fit_binnings(table: FactorTable, k=5) -> dict:
    """Quantile classes for continuous factors, one class per code for categorical ones."""
    out = {}
    for meta in table.metas:
        method = "categorical" if meta.kind == CATEGORICAL else "quantile"
        out[meta.name] = bin_factor(table.column(meta.name), method, k=k, factor=meta.name)
    return out


def train_lsi(table: FactorTable, method="IV", *, k=5, binnings=None, woe_weight="studentized"):
    """Weight tables from the labelled table and the calibrated index model.

    Returns (LsiModel, list of WeightTable in factor order).
    """
    if method not in LSI_MODELS:
        raise ValueError(f"unknown LSI model {method!r}; expected one of {LSI_MODELS}")
    if table.labels is None:
        raise ValueError("the LSI model needs labelled samples")
    binnings = binnings or fit_binnings(table, k)
    tables = [weight_table(compute_class_counts(table, binnings[name], factor=name)) for name in table.names]
    weights = []
    for wt in tables:
        w = np.asarray(wt.column(method, woe_weight), dtype=np.float64)
        if not np.all(np.isfinite(w)):
            bad = wt.class_labels[int(np.flatnonzero(~np.isfinite(w))[0])]
            raise ValueError(f"factor {wt.factor!r}, class {bad!r}: weight undefined (empty class)")
        weights.append(w)
    model = LsiModel(method, tuple(binnings[n] for n in table.names), tuple(weights))
    raw = model.lsi(table.rows)
    if np.ptp(raw) > 0:
        cal = train_logistic(raw[:, None], table.labels, C=1e6, penalty="l2")
        model.slope, model.intercept = float(cal.weights[0]), float(cal.intercept)
    return model, tables


__all__ = ["LsiModel", "train_lsi", "fit_binnings", "score_lsi_rows"]
