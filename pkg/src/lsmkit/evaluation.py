"""Confusion-matrix metrics, rank-based ROC AUC and landslide density per class.

Undefined ratios (zero denominators) are reported as ``None``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

METRIC_COLUMNS = ("Accuracy", "Precision", "Recall", "F1 score", "AUC", "Kappa")


def _ratio(num, den):
    return None if den == 0 else num / den


@dataclass(frozen=True)
class ConfusionMetrics:
    tp: int
    tn: int
    fp: int
    fn: int
    accuracy: float | None
    precision: float | None
    recall: float | None
    specificity: float | None
    f1: float | None
    kappa: float | None
    p_acc: float | None
    p_e: float | None
    correct_ratio: float | None

    @property
    def n(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @classmethod
    def from_counts(cls, tp, fp, tn, fn) -> "ConfusionMetrics":
        tp, fp, tn, fn = int(tp), int(fp), int(tn), int(fn)
        n = tp + tn + fp + fn
        precision = _ratio(tp, tp + fp)
        recall = _ratio(tp, tp + fn)
        if precision is None or recall is None or precision + recall == 0:
            f1 = None
        else:
            f1 = 2 * precision * recall / (precision + recall)
        p_acc = _ratio(tp + tn, n)
        p_e = _ratio((tp + fp) * (tp + fn) + (tn + fn) * (tn + fp), n * n)
        if p_acc is None or p_e is None or p_e == 1:
            kappa = None
        else:
            kappa = (p_acc - p_e) / (1 - p_e)
        positives = tp + fn
        negatives = tn + fp
        return cls(tp, tn, fp, fn, p_acc, precision, recall, _ratio(tn, tn + fp), f1, kappa, p_acc, p_e,
                   _ratio(tp + tn, positives + negatives))


def confusion_counts(scores, labels, threshold=0.5):
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1 or len(s) == 0:
        raise ValueError("scores and labels must be equal-length, non-empty 1-D sequences")
    pred = s >= threshold
    pos = y == 1
    return (int((pred & pos).sum()), int((pred & ~pos).sum()),
            int((~pred & ~pos).sum()), int((~pred & pos).sum()))


def confusion_metrics(scores, labels, threshold=0.5) -> ConfusionMetrics:
    """Metrics for predictions ``score >= threshold`` against binary labels."""
    return ConfusionMetrics.from_counts(*confusion_counts(scores, labels, threshold))


@dataclass(frozen=True, eq=False)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float


def auc_score(scores, labels) -> float:
    """Mann-Whitney AUC with midranks for ties."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC AUC needs both classes")
    ranks = rankdata(s)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_auc(scores, labels) -> RocCurve:
    """Empirical ROC curve (one point per distinct score) and its AUC."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be equal-length 1-D sequences")
    auc = auc_score(s, y)
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    pos = (y[order] == 1).astype(np.float64)
    last_of_group = np.r_[s_sorted[1:] != s_sorted[:-1], True]
    tp = np.cumsum(pos)[last_of_group]
    fp = np.cumsum(1.0 - pos)[last_of_group]
    tpr = np.r_[0.0, tp / pos.sum()]
    fpr = np.r_[0.0, fp / (len(pos) - pos.sum())]
    thresholds = np.r_[np.inf, s_sorted[last_of_group]]
    return RocCurve(fpr, tpr, thresholds, auc)


def density_by_class(classes, landslide_mask, n_classes=5, valid=None) -> np.ndarray:
    """Percentage of landslide cells falling in each susceptibility class.

    ``classes`` is an integer class array (or a susceptibility grid exposing
    ``grid``); ``valid`` optionally masks out nodata cells.
    """
    grid = getattr(classes, "grid", None)
    if grid is not None:
        valid = grid.valid if valid is None else valid & grid.valid
        classes = grid.values
    c = np.asarray(classes)
    m = np.asarray(landslide_mask, dtype=bool)
    if c.shape != m.shape:
        raise ValueError("class array and landslide mask must be aligned")
    keep = m if valid is None else m & np.asarray(valid, dtype=bool)
    if not keep.any():
        raise ValueError("no landslide cells in mask")
    counts = np.bincount(c[keep].astype(np.int64), minlength=n_classes)[:n_classes]
    return 100.0 * counts / counts.sum()


def write_metrics_csv(rows, path) -> None:
    """``rows`` are (model, factor_set, ConfusionMetrics, auc) tuples."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["Model", "Factor set"] + list(METRIC_COLUMNS) + ["Specificity", "Correct ratio"])
        for model, fset, m, auc in rows:
            vals = (m.accuracy, m.precision, m.recall, m.f1, auc, m.kappa, m.specificity, m.correct_ratio)
            w.writerow([model, fset] + ["undefined" if v is None else repr(float(v)) for v in vals])
