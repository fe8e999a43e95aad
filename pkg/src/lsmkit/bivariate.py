"""Per-class frequency ratio, information value and weights of evidence.

For a class, the 2 x 2 contingency of (inside / outside class) x
(landslide / stable) pixels drives every weight. Zero cells are replaced by
0.5 before any logarithm (Haldane-Anscombe correction); classes with no
pixels at all have undefined weights (NaN).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .data import ClassBinning, FactorTable
from .grid import RasterGrid

WEIGHT_COLUMNS = ("factor", "class", "pixels_total", "pixels_landslide",
                  "FR", "IV", "W_plus", "W_minus", "C", "S_C", "Wf")
LSI_MODELS = ("IV", "WoE", "FR")


@dataclass(frozen=True, eq=False)
class ClassCounts:
    factor: str
    class_labels: tuple
    pixels_total: np.ndarray
    pixels_landslide: np.ndarray

    def __post_init__(self):
        tot = np.asarray(self.pixels_total, dtype=np.int64)
        land = np.asarray(self.pixels_landslide, dtype=np.int64)
        if tot.shape != land.shape or tot.ndim != 1 or len(self.class_labels) != len(tot):
            raise ValueError("class labels and count arrays must align")
        if np.any(tot < 0) or np.any(land < 0):
            raise ValueError("counts must be non-negative")
        if np.any(land > tot):
            raise ValueError(f"{self.factor}: landslide pixels exceed total pixels in a class")
        object.__setattr__(self, "pixels_total", tot)
        object.__setattr__(self, "pixels_landslide", land)
        object.__setattr__(self, "class_labels", tuple(self.class_labels))

    @property
    def all_pixels(self) -> int:
        return int(self.pixels_total.sum())

    @property
    def all_landslides(self) -> int:
        return int(self.pixels_landslide.sum())


def compute_class_counts(source, binning: ClassBinning, landslide_mask=None, factor=None) -> ClassCounts:
    """Tally pixels and landslide pixels per class.

    ``source`` is a FactorTable (labels mark landslide rows; ``factor`` names
    the column, defaulting to ``binning.factor``) or a RasterGrid paired with a
    boolean ``landslide_mask`` of the same shape. Nodata cells are skipped.
    """
    if isinstance(source, FactorTable):
        if source.labels is None:
            raise ValueError("table needs labels to count landslides")
        values = source.column(factor or binning.factor)
        land = source.labels.astype(bool)
    elif isinstance(source, RasterGrid):
        if landslide_mask is None:
            raise ValueError("a raster source needs a landslide mask")
        mask = np.asarray(landslide_mask, dtype=bool)
        if mask.shape != source.values.shape:
            raise ValueError("landslide mask shape does not match the grid")
        valid = source.valid
        values = source.values[valid]
        land = mask[valid]
    else:
        values = np.asarray(source, dtype=np.float64).ravel()
        if landslide_mask is None:
            raise ValueError("value arrays need a landslide mask")
        land = np.asarray(landslide_mask, dtype=bool).ravel()
    if values.size == 0:
        raise ValueError("no cells to count")
    if not land.any():
        raise ValueError("no landslide cells to count")
    cls = binning.assign(values)
    k = binning.n_classes
    tot = np.bincount(cls, minlength=k).astype(np.int64)
    lnd = np.bincount(cls[land], minlength=k).astype(np.int64)
    return ClassCounts(binning.factor, binning.class_labels, tot, lnd)


def _check(counts: ClassCounts):
    if counts.all_landslides <= 0 or counts.all_pixels <= 0:
        raise ValueError(f"{counts.factor}: need at least one pixel and one landslide")


def _contingency(counts: ClassCounts):
    """Smoothed (a, b, c, d): landslide in, stable in, landslide out, stable out."""
    L = counts.all_landslides
    P = counts.all_pixels
    a = counts.pixels_landslide.astype(np.float64)
    b = (counts.pixels_total - counts.pixels_landslide).astype(np.float64)
    c = L - a
    d = (P - L) - b
    cells = [np.where(x == 0, 0.5, x) for x in (a, b, c, d)]
    return cells


def frequency_ratio(counts: ClassCounts) -> np.ndarray:
    """Landslide share of each class over its area share; NaN for empty classes."""
    _check(counts)
    tot = counts.pixels_total.astype(np.float64)
    land_share = counts.pixels_landslide / counts.all_landslides
    with np.errstate(divide="ignore", invalid="ignore"):
        fr = land_share / (tot / counts.all_pixels)
    return np.where(tot > 0, fr, np.nan)


def information_value(counts: ClassCounts) -> np.ndarray:
    """ln(class landslide density / map landslide density).

    Equals ln(FR) wherever FR > 0; classes without landslides use the
    smoothed contingency.
    """
    fr = frequency_ratio(counts)
    a, b, c, d = _contingency(counts)
    with np.errstate(divide="ignore", invalid="ignore"):
        smoothed = np.log((a / (a + b)) / ((a + c) / (a + b + c + d)))
        iv = np.where(fr > 0, np.log(np.where(fr > 0, fr, 1.0)), smoothed)
    return np.where(counts.pixels_total > 0, iv, np.nan)


@dataclass(frozen=True, eq=False)
class EvidenceWeights:
    w_plus: np.ndarray
    w_minus: np.ndarray
    contrast: np.ndarray
    s_of_c: np.ndarray
    studentized: np.ndarray


def weights_of_evidence(counts: ClassCounts) -> EvidenceWeights:
    """Positive/negative weights, contrast, its standard deviation and the studentized contrast."""
    _check(counts)
    a, b, c, d = _contingency(counts)
    L = a + c
    S = b + d
    w_plus = np.log((a / L) / (b / S))
    w_minus = np.log((c / L) / (d / S))
    contrast = w_plus - w_minus
    s_of_c = np.sqrt(1 / a + 1 / b + 1 / c + 1 / d)
    studentized = contrast / s_of_c
    empty = counts.pixels_total == 0
    out = [np.where(empty, np.nan, x) for x in (w_plus, w_minus, contrast, s_of_c, studentized)]
    return EvidenceWeights(*out)


@dataclass(frozen=True, eq=False)
class WeightTable:
    factor: str
    class_labels: tuple
    pixels_total: np.ndarray
    pixels_landslide: np.ndarray
    fr: np.ndarray
    iv: np.ndarray
    w_plus: np.ndarray
    w_minus: np.ndarray
    contrast: np.ndarray
    s_of_c: np.ndarray
    studentized: np.ndarray

    def column(self, model: str, woe_weight="studentized") -> np.ndarray:
        if model == "IV":
            return self.iv
        if model == "FR":
            return self.fr
        if model == "WoE":
            return self.studentized if woe_weight == "studentized" else self.contrast
        raise ValueError(f"unknown LSI model {model!r}; expected one of {LSI_MODELS}")

    def records(self):
        for i, label in enumerate(self.class_labels):
            yield (self.factor, label, int(self.pixels_total[i]), int(self.pixels_landslide[i]),
                   self.fr[i], self.iv[i], self.w_plus[i], self.w_minus[i],
                   self.contrast[i], self.s_of_c[i], self.studentized[i])


def weight_table(counts: ClassCounts) -> WeightTable:
    woe = weights_of_evidence(counts)
    return WeightTable(counts.factor, counts.class_labels, counts.pixels_total, counts.pixels_landslide,
                       frequency_ratio(counts), information_value(counts),
                       woe.w_plus, woe.w_minus, woe.contrast, woe.s_of_c, woe.studentized)


def write_weight_tables(tables, path) -> None:
    """Write weight tables to CSV with a fixed column order."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(WEIGHT_COLUMNS)
        for table in tables:
            for rec in table.records():
                w.writerow([_cell(v) for v in rec])


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return "undefined" if not np.isfinite(v) else repr(float(v))
    return str(v)


def score_lsi(weight_tables, binnings, sample, model="IV", *, woe_weight="studentized") -> float:
    """Landslide susceptibility index of one sample.

    ``weight_tables`` and ``binnings`` map factor name to WeightTable and
    ClassBinning; ``sample`` maps factor name to its value.
    """
    total = 0.0
    for name, value in sample.items():
        if name not in weight_tables or name not in binnings:
            raise KeyError(f"no weight table or binning for factor {name!r}")
        cls = int(binnings[name].assign([value])[0])
        w = weight_tables[name].column(model, woe_weight)[cls]
        if not np.isfinite(w):
            raise ValueError(f"factor {name!r}, class {weight_tables[name].class_labels[cls]!r}: weight undefined")
        total += float(w)
    return total


def score_lsi_rows(weight_tables, binnings, names, rows, model="IV", *, woe_weight="studentized") -> np.ndarray:
    """Vectorised LSI for an n x f array whose columns follow ``names``."""
    rows = np.asarray(rows, dtype=np.float64)
    total = np.zeros(rows.shape[0])
    for j, name in enumerate(names):
        cls = binnings[name].assign(rows[:, j])
        col = weight_tables[name].column(model, woe_weight)
        w = col[cls]
        if not np.all(np.isfinite(w)):
            bad = int(cls[~np.isfinite(w)][0])
            raise ValueError(f"factor {name!r}, class {weight_tables[name].class_labels[bad]!r}: weight undefined")
        total += w
    return total
