"""Natural-breaks classification of score grids into susceptibility levels.

``jenks_breaks`` solves the 1-D optimal partition exactly: a dynamic program
over the sorted distinct values minimising the total within-class sum of
squared deviations. Each layer of the program is filled by divide and
conquer over the monotone optimal split position, vectorised one recursion
depth at a time.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .grid import RasterGrid, write_ascii_grid

LEVEL_NAMES = ("very low", "low", "moderate", "high", "very high")
MAX_BREAK_SAMPLE = 100_000


def _weighted_sums(values):
    v = np.asarray(values, dtype=np.float64).ravel()
    v = v[np.isfinite(v)]
    uniq, counts = np.unique(v, return_counts=True)
    centred = uniq - (uniq @ counts) / counts.sum() if len(uniq) else uniq
    w = counts.astype(np.float64)
    S0 = np.r_[0.0, np.cumsum(w)]
    S1 = np.r_[0.0, np.cumsum(w * centred)]
    S2 = np.r_[0.0, np.cumsum(w * centred * centred)]
    return uniq, S0, S1, S2


def _ssd(S0, S1, S2, i, j):
    """Within-group squared deviation of distinct values i..j-1 (vectorised)."""
    n = S0[j] - S0[i]
    s = S1[j] - S1[i]
    return np.maximum(S2[j] - S2[i] - s * s / n, 0.0)


def _layer(prev, c, m, S0, S1, S2):
    """best[j], arg[j] = min over i of prev[i] + ssd(i, j) for j in c..m."""
    best = np.full(m + 1, np.inf)
    arg = np.zeros(m + 1, dtype=np.int64)
    jlo, jhi = np.array([c]), np.array([m])
    olo, ohi = np.array([c - 1]), np.array([m - 1])
    while len(jlo):
        mid = (jlo + jhi) // 2
        lo = olo
        hi = np.minimum(ohi, mid - 1)
        lengths = hi - lo + 1
        offsets = np.r_[0, np.cumsum(lengths)[:-1]]
        seg = np.repeat(np.arange(len(mid)), lengths)
        i = lo[seg] + (np.arange(lengths.sum()) - offsets[seg])
        val = prev[i] + _ssd(S0, S1, S2, i, mid[seg])
        minv = np.minimum.reduceat(val, offsets)
        first = np.minimum.reduceat(np.where(val == minv[seg], i, np.iinfo(np.int64).max), offsets)
        best[mid] = minv
        arg[mid] = first
        left = jlo <= mid - 1
        right = mid + 1 <= jhi
        jlo, jhi, olo, ohi = (np.r_[jlo[left], mid[right] + 1], np.r_[mid[left] - 1, jhi[right]],
                              np.r_[olo[left], first[right]], np.r_[first[left], ohi[right]])
    return best, arg


def jenks_partition(values, k):
    """Optimal split positions into the sorted distinct values, and the objective."""
    uniq, S0, S1, S2 = _weighted_sums(values)
    m = len(uniq)
    if k < 2:
        raise ValueError("class count must be >= 2")
    if m < k:
        raise ValueError(f"only {m} distinct values for {k} classes")
    cost = np.full(m + 1, np.inf)
    cost[1:] = _ssd(S0, S1, S2, np.zeros(m, dtype=np.int64), np.arange(1, m + 1))
    args = []
    for c in range(2, k + 1):
        cost, arg = _layer(cost, c, m, S0, S1, S2)
        args.append(arg)
    cuts = []
    j = m
    for arg in reversed(args):
        j = int(arg[j])
        cuts.append(j)
    return uniq, tuple(reversed(cuts)), float(cost[m])


def jenks_breaks(values, k=5, *, max_sample=MAX_BREAK_SAMPLE, seed=0) -> np.ndarray:
    """k-1 ascending breaks; each break is the smallest value of the class above it.

    Inputs larger than ``max_sample`` finite values are subsampled with ``seed``.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    v = v[np.isfinite(v)]
    if max_sample and len(v) > max_sample:
        v = np.random.default_rng(seed).choice(v, max_sample, replace=False)
    uniq, cuts, _ = jenks_partition(v, k)
    return uniq[list(cuts)]


def within_class_ssd(values, breaks) -> float:
    """Total within-class squared deviation of ``values`` classed by ``breaks``."""
    v = np.asarray(values, dtype=np.float64).ravel()
    cls = np.searchsorted(np.asarray(breaks, dtype=np.float64), v, side="right")
    total = 0.0
    for c in np.unique(cls):
        grp = v[cls == c]
        total += float(((grp - grp.mean()) ** 2).sum())
    return total


@dataclass(frozen=True, eq=False)
class SusceptibilityGrid:
    grid: RasterGrid    # class indices, nodata where the score grid had none
    breaks: np.ndarray
    level_names: tuple

    def counts(self) -> np.ndarray:
        vals = self.grid.values[self.grid.valid].astype(np.int64)
        return np.bincount(vals, minlength=len(self.level_names))


def level_names(n_classes) -> tuple:
    return LEVEL_NAMES if n_classes == len(LEVEL_NAMES) else tuple(f"class {i}" for i in range(n_classes))


def classify(scores, breaks) -> np.ndarray:
    """Class index = number of breaks at or below the score (ties go up)."""
    b = np.asarray(breaks, dtype=np.float64)
    if b.ndim != 1 or np.any(np.diff(b) <= 0):
        raise ValueError("breaks must be strictly ascending")
    return np.searchsorted(b, np.asarray(scores, dtype=np.float64), side="right")


def classify_grid(scores: RasterGrid, breaks) -> SusceptibilityGrid:
    valid = scores.valid
    cls = classify(np.where(valid, scores.values, 0.0), breaks).astype(np.float64)
    nodata = scores.nodata if np.isfinite(scores.nodata) else -9999.0
    values = np.where(valid, cls, nodata)
    grid = RasterGrid.like(scores, values, nodata)
    b = np.asarray(breaks, dtype=np.float64).copy()
    return SusceptibilityGrid(grid, b, level_names(len(b) + 1))


def legend_path(path) -> str:
    root, _ = os.path.splitext(os.fspath(path))
    return root + ".legend.txt"


def export_ascii_grid(grid, path) -> None:
    """Write a score or class grid; class grids also get a legend sidecar."""
    if isinstance(grid, SusceptibilityGrid):
        write_ascii_grid(grid.grid, path)
        lines = [f"{i} {name}" for i, name in enumerate(grid.level_names)]
        lines.append("breaks " + " ".join(repr(float(b)) for b in grid.breaks))
        try:
            with open(legend_path(path), "w", encoding="utf-8", newline="\n") as fh:
                fh.write("\n".join(lines) + "\n")
        except OSError as exc:
            raise OSError(f"cannot write legend to {legend_path(path)}: {exc}") from exc
    else:
        write_ascii_grid(grid, path)
