"""Sample tables, factor binning, negative sampling, splitting and scaling."""
from __future__ import annotations

import csv
import math
import os
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .factors import CATEGORICAL, CONTINUOUS, FactorMeta
from .grid import RasterGrid

RESERVED_COLUMNS = ("label", "x", "y")


@dataclass(frozen=True, eq=False)
class FactorTable:
    """An n x f matrix of factor values with optional labels and map coordinates."""

    metas: tuple
    rows: np.ndarray
    labels: np.ndarray | None = None
    coords: np.ndarray | None = None

    def __post_init__(self):
        metas = tuple(self.metas)
        names = [m.name for m in metas]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate factor names: {dup}")
        rows = np.array(self.rows, dtype=np.float64)
        if rows.ndim == 1 and len(metas) == 1:
            rows = rows[:, None]
        if rows.ndim != 2 or rows.shape[1] != len(metas):
            raise ValueError(f"rows must be n x {len(metas)}, got shape {rows.shape}")
        if rows.shape[0] < 1:
            raise ValueError("a factor table needs at least one row")
        if not np.all(np.isfinite(rows)):
            r, c = np.argwhere(~np.isfinite(rows))[0]
            raise ValueError(f"non-finite value at row {r}, factor {names[c]!r}")
        rows.setflags(write=False)
        object.__setattr__(self, "metas", metas)
        object.__setattr__(self, "rows", rows)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (rows.shape[0],):
                raise ValueError("labels length must equal row count")
            if not np.all((labels == 0) | (labels == 1)):
                raise ValueError("labels must be 0 or 1")
            labels = labels.astype(np.int64)
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)
        if self.coords is not None:
            coords = np.array(self.coords, dtype=np.float64)
            if coords.shape != (rows.shape[0], 2):
                raise ValueError("coords must be n x 2")
            coords.setflags(write=False)
            object.__setattr__(self, "coords", coords)

    @property
    def names(self) -> tuple:
        return tuple(m.name for m in self.metas)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def f(self) -> int:
        return self.rows.shape[1]

    def column(self, name) -> np.ndarray:
        return self.rows[:, self.names.index(name)]

    def select(self, names) -> "FactorTable":
        """Keep only the named factors, in the given order."""
        idx = [self.names.index(n) for n in names]
        return FactorTable(tuple(self.metas[i] for i in idx), self.rows[:, idx], self.labels, self.coords)

    def take(self, index) -> "FactorTable":
        """Keep only the given rows."""
        index = np.asarray(index)
        return FactorTable(
            self.metas,
            self.rows[index],
            None if self.labels is None else self.labels[index],
            None if self.coords is None else self.coords[index],
        )

    def with_rows(self, rows) -> "FactorTable":
        return FactorTable(self.metas, rows, self.labels, self.coords)


def load_factor_table(path, schema=None) -> FactorTable:
    """Read a UTF-8 CSV of samples.

    Columns ``label``, ``x`` and ``y`` are reserved. Every other column must
    appear in ``schema`` (column name -> FactorMeta); when ``schema`` is None
    all other columns become continuous conditioning factors.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{os.fspath(path)}: empty file") from None
        body = list(reader)
    seen = set()
    for h in header:
        if h in seen:
            raise ValueError(f"{os.fspath(path)}: duplicate column {h!r}")
        seen.add(h)
    factor_cols = [h for h in header if h not in RESERVED_COLUMNS]
    if schema is None:
        metas = [FactorMeta(h) for h in factor_cols]
    else:
        missing = [h for h in factor_cols if h not in schema]
        if missing:
            raise ValueError(f"{os.fspath(path)}: columns not covered by schema: {missing}")
        metas = [schema[h] for h in factor_cols]
        for h, m in zip(factor_cols, metas):
            if m.name != h:
                raise ValueError(f"schema entry for column {h!r} is named {m.name!r}")

    data = np.empty((len(body), len(header)))
    for i, rec in enumerate(body):
        line = i + 2
        if len(rec) != len(header):
            raise ValueError(f"{os.fspath(path)}: line {line} has {len(rec)} fields, expected {len(header)}")
        for j, cell in enumerate(rec):
            try:
                v = float(cell)
            except ValueError:
                raise ValueError(f"{os.fspath(path)}: line {line}, column {header[j]!r}: non-numeric cell {cell!r}") from None
            if not math.isfinite(v):
                raise ValueError(f"{os.fspath(path)}: line {line}, column {header[j]!r}: non-finite cell {cell!r}")
            data[i, j] = v
    if not body:
        raise ValueError(f"{os.fspath(path)}: no data rows")

    col = {h: j for j, h in enumerate(header)}
    rows = data[:, [col[h] for h in factor_cols]]
    labels = data[:, col["label"]] if "label" in col else None
    if labels is not None and not np.all((labels == 0) | (labels == 1)):
        bad = int(np.flatnonzero((labels != 0) & (labels != 1))[0])
        raise ValueError(f"{os.fspath(path)}: line {bad + 2}, column 'label': labels must be 0 or 1")
    coords = None
    if "x" in col and "y" in col:
        coords = data[:, [col["x"], col["y"]]]
    return FactorTable(tuple(metas), rows, labels, coords)


def write_factor_table(table: FactorTable, path) -> None:
    header = list(table.names)
    cols = [table.rows]
    if table.labels is not None:
        header.append("label")
        cols.append(table.labels[:, None])
    if table.coords is not None:
        header += ["x", "y"]
        cols.append(table.coords)
    data = np.hstack(cols)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for rec in data:
            w.writerow([_fmt(v) for v in rec])


def _fmt(v):
    v = float(v)
    return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)


@dataclass(frozen=True, eq=False)
class ClassBinning:
    """Class scheme for one factor.

    Continuous: ``edges`` are ascending lower bounds; class i covers
    [edges[i], edges[i+1]) and the last class is open above. Values below the
    first edge fall into class 0, so every finite value has a class.
    Categorical: ``edges`` are the category codes, one class per code.
    """

    factor: str
    edges: tuple
    class_labels: tuple
    kind: str = CONTINUOUS

    def __post_init__(self):
        edges = tuple(float(e) for e in self.edges)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "class_labels", tuple(self.class_labels))
        if len(edges) < 2:
            raise ValueError(f"{self.factor}: a binning needs at least 2 classes")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError(f"{self.factor}: edges must be strictly ascending")
        if len(self.class_labels) != len(edges):
            raise ValueError(f"{self.factor}: need one label per class")
        if self.kind not in (CONTINUOUS, CATEGORICAL):
            raise ValueError(f"{self.factor}: unknown binning kind {self.kind!r}")

    @property
    def n_classes(self) -> int:
        return len(self.edges)

    def assign(self, values) -> np.ndarray:
        """Class index for each value."""
        v = np.asarray(values, dtype=np.float64)
        edges = np.asarray(self.edges)
        if self.kind == CATEGORICAL:
            idx = np.searchsorted(edges, v)
            idx_c = np.clip(idx, 0, len(edges) - 1)
            bad = edges[idx_c] != v
            if np.any(bad):
                code = v[bad].flat[0]
                raise ValueError(f"{self.factor}: category code {code!r} not in binning")
            return idx_c
        return np.clip(np.searchsorted(edges, v, side="right") - 1, 0, len(edges) - 1)


def _interval_labels(edges):
    labels = [f"{_fmt(a)}–{_fmt(b)}" for a, b in zip(edges, edges[1:])]
    labels.append(f"{_fmt(edges[-1])}<")
    return tuple(labels)


def bin_factor(values, method="quantile", *, k=5, edges=None, factor="") -> ClassBinning:
    """Build a class scheme for a factor.

    Parameters
    ----------
    values : array-like
        Observed factor values.
    method : {"quantile", "fixed", "categorical"}
        ``quantile`` places k classes at empirical quantiles, ``fixed`` uses
        the supplied class lower bounds, ``categorical`` gives one class per
        distinct code.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("cannot bin an empty value list")
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot bin non-finite values")
    if method == "quantile":
        if k < 2:
            raise ValueError("quantile binning needs k >= 2")
        if v.min() == v.max():
            raise ValueError(f"{factor or 'factor'}: degenerate distribution (constant values)")
        qs = np.quantile(v, np.arange(k) / k)
        qs[0] = v.min()
        if np.any(np.diff(qs) <= 0):
            raise ValueError(f"{factor or 'factor'}: degenerate distribution (tied quantiles for k={k})")
        return ClassBinning(factor, tuple(qs), _interval_labels(qs), CONTINUOUS)
    if method == "fixed":
        if edges is None:
            raise ValueError("fixed binning needs edges")
        return ClassBinning(factor, tuple(edges), _interval_labels(edges), CONTINUOUS)
    if method == "categorical":
        codes = np.unique(v)
        if codes.size < 2:
            raise ValueError(f"{factor or 'factor'}: categorical binning needs at least 2 codes")
        return ClassBinning(factor, tuple(codes), tuple(_fmt(c) for c in codes), CATEGORICAL)
    raise ValueError(f"unknown binning method {method!r}")


def sample_non_landslides(landslide_coords, candidate_grid: RasterGrid, min_dist_m, count, seed):
    """Draw ``count`` distinct candidate cell centres far from every landslide.

    Candidate cells are the grid's data cells that contain no landslide. They
    are visited in a seeded random order and accepted when no landslide lies
    within ``min_dist_m``; landslides are bucketed on a square hash of side
    ``min_dist_m`` so each test only scans the 3 x 3 neighbouring buckets.

    Returns an array of shape (count, 2).
    """
    if min_dist_m < 0:
        raise ValueError("min_dist_m must be >= 0")
    if count < 1:
        raise ValueError("count must be >= 1")
    pts = np.asarray(landslide_coords, dtype=np.float64).reshape(-1, 2)
    xs, ys = candidate_grid.cell_centers()
    valid = candidate_grid.valid.copy()
    r, c = candidate_grid.cell_index(pts[:, 0], pts[:, 1])
    inside = r >= 0
    valid[r[inside], c[inside]] = False
    cand = np.column_stack([xs[valid], ys[valid]])

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(cand))
    accepted = []
    if min_dist_m == 0 or len(pts) == 0:
        accepted = list(order[:count])
    else:
        buckets = defaultdict(list)
        keys = np.floor(pts / min_dist_m).astype(np.int64)
        for (kx, ky), p in zip(keys, pts):
            buckets[(int(kx), int(ky))].append(p)
        buckets = {k: np.array(v) for k, v in buckets.items()}
        d2 = min_dist_m * min_dist_m
        for i in order:
            x, y = cand[i]
            kx, ky = int(math.floor(x / min_dist_m)), int(math.floor(y / min_dist_m))
            ok = True
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    b = buckets.get((kx + dx, ky + dy))
                    if b is not None and np.any((b[:, 0] - x) ** 2 + (b[:, 1] - y) ** 2 < d2):
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                accepted.append(i)
                if len(accepted) == count:
                    break
    if len(accepted) < count:
        raise ValueError(f"only {len(accepted)} eligible cells for {count} requested non-landslide samples")
    return cand[np.asarray(accepted, dtype=np.int64)]


def generate_negative_samples(landslide_coords, candidate_grid, *, min_dist_m=3000.0,
                              oversample_ratio=4.0, final_count=None, seed=0):
    """Oversample distance-constrained negatives, then reduce to ``final_count``."""
    n_land = len(np.asarray(landslide_coords).reshape(-1, 2))
    initial = max(1, int(math.ceil(oversample_ratio * n_land)))
    pool = sample_non_landslides(landslide_coords, candidate_grid, min_dist_m, initial, seed)
    if final_count is None or final_count >= len(pool):
        return pool
    rng = np.random.default_rng([seed, 1])
    keep = np.sort(rng.choice(len(pool), size=final_count, replace=False))
    return pool[keep]


def split_train_test(table: FactorTable, test_fraction, seed):
    """Stratified, seeded train/test split."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    if table.labels is None:
        raise ValueError("split_train_test needs labels")
    rng = np.random.default_rng(seed)
    test_idx = []
    for label in (0, 1):
        stratum = np.flatnonzero(table.labels == label)
        if len(stratum) < 2:
            raise ValueError(f"label stratum {label} has {len(stratum)} rows; need at least 2")
        n_test = min(max(int(round(test_fraction * len(stratum))), 1), len(stratum) - 1)
        test_idx.append(rng.permutation(stratum)[:n_test])
    test = np.sort(np.concatenate(test_idx))
    mask = np.zeros(table.n, dtype=bool)
    mask[test] = True
    return table.take(np.flatnonzero(~mask)), table.take(test)


def stratified_folds(labels, k, seed):
    """Assign each row to one of ``k`` folds, balanced within each label."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    fold = np.empty(len(labels), dtype=np.int64)
    for label in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == label))
        fold[idx] = np.arange(len(idx)) % k
    return fold


@dataclass(frozen=True, eq=False)
class Scaler:
    """Per-factor mean and population standard deviation."""

    names: tuple
    mean: np.ndarray
    std: np.ndarray

    def transform(self, rows) -> np.ndarray:
        return (np.asarray(rows, dtype=np.float64) - self.mean) / self.std

    def inverse_transform(self, rows) -> np.ndarray:
        return np.asarray(rows, dtype=np.float64) * self.std + self.mean

    def to_dict(self):
        return {"names": list(self.names), "mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["names"]), np.array(d["mean"], dtype=np.float64), np.array(d["std"], dtype=np.float64))


def fit_scaler(table: FactorTable) -> Scaler:
    mean = table.rows.mean(axis=0)
    std = table.rows.std(axis=0)
    for name, s in zip(table.names, std):
        if not s > 0:
            raise ValueError(f"factor {name!r} has zero variance; cannot standardize")
    return Scaler(table.names, mean, std)


def standardize(table: FactorTable):
    """Centre and scale every factor; returns (table, scaler)."""
    scaler = fit_scaler(table)
    return table.with_rows(scaler.transform(table.rows)), scaler
