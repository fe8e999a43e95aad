"""Global importance rankings and cross-(model, method) consistency."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.stats import spearmanr


@dataclass(frozen=True, eq=False)
class GlobalImportance:
    factors: tuple
    mean_abs: np.ndarray
    ranks: np.ndarray  # 1 = most important
    model_id: str = ""
    method: str = ""

    @property
    def label(self) -> str:
        return f"{self.model_id}/{self.method}"

    def ordered(self) -> tuple:
        return tuple(self.factors[i] for i in np.argsort(self.ranks))

    def top(self, k) -> tuple:
        return self.ordered()[:k]


def global_importance(attributions) -> GlobalImportance:
    """Mean |contribution| per factor over an evaluation set, ranked descending."""
    attributions = list(attributions)
    if not attributions:
        raise ValueError("no attributions to aggregate")
    first = attributions[0]
    for a in attributions[1:]:
        if a.factors != first.factors:
            raise ValueError("attributions cover different factor sets")
        if (a.method, a.model_id) != (first.method, first.model_id):
            raise ValueError("attributions mix models or methods")
    mean_abs = np.mean(np.abs(np.stack([a.phi for a in attributions])), axis=0)
    order = np.argsort(-mean_abs, kind="stable")
    ranks = np.empty(len(order), dtype=np.int64)
    ranks[order] = np.arange(1, len(order) + 1)
    return GlobalImportance(first.factors, mean_abs, ranks, first.model_id, first.method)


def rank_correlation(a, b) -> float:
    """Spearman correlation with average ranks; constant vectors agree only with constants."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    const_a, const_b = np.ptp(a) == 0, np.ptp(b) == 0
    if const_a or const_b:
        return 1.0 if const_a and const_b else 0.0
    return float(np.clip(spearmanr(a, b).statistic, -1.0, 1.0))


@dataclass(frozen=True, eq=False)
class ConsistencyReport:
    labels: tuple
    correlation: np.ndarray
    factors: tuple
    local_topk: dict  # label -> tuple of (instance_id, top-k factor tuple)
    k: int = 3

    def min_correlation(self) -> float:
        return float(self.correlation.min())

    def write_matrix_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([""] + list(self.labels))
            for label, row in zip(self.labels, self.correlation):
                w.writerow([label] + [repr(float(v)) for v in row])

    def write_topk_csv(self, path, reference=None) -> None:
        """One row per (combination, instance); ``reference`` adds a comparison row per instance."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["combination", "instance_id"] + [f"factor_{i + 1}" for i in range(self.k)])
            for label in self.labels:
                for inst, top in self.local_topk.get(label, ()):
                    w.writerow([label, inst] + list(top) + [""] * (self.k - len(top)))
            for inst, top in (reference or {}).items():
                w.writerow(["reference", inst] + list(top) + [""] * (self.k - len(top)))


def consistency_report(rankings, local_attributions=None, k=3) -> ConsistencyReport:
    """Pairwise Spearman matrix over rankings plus per-instance top-k lists.

    ``rankings`` is a sequence of GlobalImportance; ``local_attributions``
    maps a combination label to the Attribution list explained for it.
    """
    rankings = list(rankings)
    if len(rankings) < 2:
        raise ValueError("consistency needs at least two (model, method) combinations")
    factors = rankings[0].factors
    for r in rankings[1:]:
        if r.factors != factors:
            raise ValueError(f"factor sets differ between {rankings[0].label} and {r.label}")
    m = len(rankings)
    corr = np.eye(m)
    for i in range(m):
        for j in range(i + 1, m):
            corr[i, j] = corr[j, i] = rank_correlation(rankings[i].mean_abs, rankings[j].mean_abs)
    topk = {}
    for label, attrs in (local_attributions or {}).items():
        for a in attrs:
            if a.factors != factors:
                raise ValueError(f"local attributions for {label} use a different factor set")
        topk[label] = tuple((a.instance_id, a.top_k(k)) for a in attrs)
    return ConsistencyReport(tuple(r.label for r in rankings), corr, factors, topk, k)
