"""Seeded synthetic landslide data with a known, nonlinear factor response.

Every factor is driven by a latent standard-normal value z. The planted
log-odds are an additive sum of nonlinear shape functions. Most of the
signal sits in the triggering factors (with a rainfall interaction); Elevation,
Aspect, TRI and Land use add conditioning signal; the remaining factors
carry none. ``synthetic_samples`` draws independent
rows, ``synthetic_region`` draws spatially smooth factor rasters with a
landslide inventory sampled from the same response.
"""
from __future__ import annotations

import os
import re

import numpy as np
from scipy.ndimage import gaussian_filter
from scipy.stats import norm

from .data import FactorTable, generate_negative_samples, write_factor_table
from .factors import CONDITIONING, CONTINUOUS, TGRA_FACTORS, FactorMeta
from .grid import RasterGrid, write_ascii_grid

# (offset, scale, transform) taking latent z to the factor's units; categorical
# factors map z to codes 1..K by equal-probability cuts.
_UNITS = {
    "Elevation": (800.0, 350.0, "linear"),
    "Slope": (25.0, 9.0, "linear"),
    "Aspect": (180.0, 90.0, "linear"),
    "Plan Curvature": (0.0, 0.8, "linear"),
    "Profile Curvature": (0.0, 0.8, "linear"),
    "Surface cut depth": (0.0, 6.0, "exp"),
    "TRI": (0.0, 12.0, "exp"),
    "Landform": (0, 6, "codes"),
    "Lithology": (0, 6, "codes"),
    "Distance to fault": (0.0, 2500.0, "exp"),
    "Land use": (0, 5, "codes"),
    "Distance to road": (0.0, 600.0, "exp"),
    "NDVI": (0.45, 0.18, "linear"),
    "SPI": (0.0, 40.0, "exp"),
    "STI": (0.0, 15.0, "exp"),
    "TWI": (7.0, 2.2, "linear"),
    "Distance to stream": (0.0, 300.0, "exp"),
    "Peak rainfall intensity": (0.0, 30.0, "exp"),
    "Average rainfall intensity": (0.0, 1.5, "exp"),
}

_LITHOLOGY_EFFECT = np.array([0.9, -0.7, 0.4, -1.0, 1.1, -0.7])
_LANDUSE_EFFECT = np.array([0.8, -0.8, 0.4, -0.6, 0.2])


def _codes(z, k):
    return np.clip(np.floor(norm.cdf(z) * k), 0, k - 1).astype(np.int64) + 1


def to_units(name, z):
    off, scale, kind = _UNITS[name]
    if kind == "linear":
        return off + scale * z
    if kind == "exp":
        return scale * np.exp(0.5 * z)
    return _codes(z, scale).astype(np.float64)


def planted_logit(Z, names=None) -> np.ndarray:
    """Log-odds (before the intercept) from latent values; columns follow ``names``."""
    names = tuple(names or (m.name for m in TGRA_FACTORS))
    col = {n: Z[..., i] for i, n in enumerate(names)}

    def z(n):
        return col[n]

    out = 2.0 * np.exp(-(z("Slope") - 0.5) ** 2)
    out = out + 2.2 * np.exp(-z("Elevation") ** 2)
    out = out + 1.5 * np.exp(-(z("Distance to fault") + 0.8) ** 2)
    out = out + 1.4 * (z("Distance to road") < -0.5)
    out = out - 0.9 * z("NDVI") ** 2
    out = out + 1.2 * np.exp(-(z("TWI") - 1.0) ** 2)
    out = out + 1.2 * np.exp(-z("Distance to stream") ** 2)
    out = out + 1.0 * np.maximum(z("Peak rainfall intensity"), 0.0)
    out = out + 1.0 * ((z("Average rainfall intensity") > 0) & (z("Peak rainfall intensity") > 0))
    out = out + _LITHOLOGY_EFFECT[_codes(z("Lithology"), 6) - 1]
    out = out + 1.2 * np.exp(-(z("Aspect") - 0.8) ** 2)
    out = out + 0.8 * np.maximum(z("TRI"), 0.0)
    out = out + _LANDUSE_EFFECT[_codes(z("Land use"), 5) - 1]
    return out


def _latent_to_rows(Z):
    return np.column_stack([to_units(m.name, Z[:, i]) for i, m in enumerate(TGRA_FACTORS)])


def _intercept(logit, target_rate):
    lo, hi = -50.0, 50.0
    for _ in range(100):
        mid = (lo + hi) / 2
        if np.mean(1.0 / (1.0 + np.exp(-(logit + mid)))) < target_rate:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def synthetic_samples(n=5000, seed=0, *, positive_rate=0.5, signal=1.0) -> FactorTable:
    """Independent rows over all 19 factors with labels drawn from the planted response."""
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, len(TGRA_FACTORS)))
    logit = signal * planted_logit(Z)
    logit = logit + _intercept(logit, positive_rate)
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-logit))).astype(np.int64)
    return FactorTable(TGRA_FACTORS, _latent_to_rows(Z), y)


def planted_table(n=2000, seed=0, *, n_factors=6, weights=(3.0, 2.0, 1.0), relevant=(0, 1, 2)) -> FactorTable:
    """Standard-normal factors where only ``relevant`` columns drive a linear logit."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, n_factors))
    logit = X[:, list(relevant)] @ np.asarray(weights, dtype=np.float64)
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-logit))).astype(np.int64)
    metas = tuple(FactorMeta(f"F{i + 1}", frozenset({CONDITIONING}), CONTINUOUS, "") for i in range(n_factors))
    return FactorTable(metas, X, y)


def slug(name) -> str:
    """File-name stem for a factor raster."""
    return re.sub(r"[^a-z0-9]+", "_", name.lower()).strip("_")


def synthetic_region(nrows=120, ncols=160, seed=0, *, cellsize=100.0, smoothness=3.0,
                     landslide_rate=0.03, min_dist_m=300.0):
    """Smooth factor rasters, a landslide mask and a balanced sample table.

    Returns (rasters: name -> RasterGrid, landslide mask RasterGrid, FactorTable).
    Negatives are drawn at least ``min_dist_m`` from every landslide cell.
    """
    rng = np.random.default_rng(seed)
    f = len(TGRA_FACTORS)
    Z = np.empty((nrows, ncols, f))
    for i in range(f):
        field = gaussian_filter(rng.standard_normal((nrows, ncols)), smoothness, mode="reflect")
        Z[:, :, i] = (field - field.mean()) / field.std()
    logit = planted_logit(Z)
    logit = logit + _intercept(logit.ravel(), landslide_rate)
    mask = rng.random((nrows, ncols)) < 1.0 / (1.0 + np.exp(-logit))
    xll, yll = 500000.0, 3400000.0
    rasters = {m.name: RasterGrid(ncols, nrows, xll, yll, cellsize, -9999.0, to_units(m.name, Z[:, :, i]))
               for i, m in enumerate(TGRA_FACTORS)}
    mask_grid = RasterGrid(ncols, nrows, xll, yll, cellsize, -9999.0, mask.astype(np.float64))
    any_grid = next(iter(rasters.values()))
    xs, ys = any_grid.cell_centers()
    pos = np.column_stack([xs[mask], ys[mask]])
    neg = generate_negative_samples(pos, any_grid, min_dist_m=min_dist_m, oversample_ratio=1.0,
                                    final_count=len(pos), seed=seed)
    coords = np.vstack([pos, neg])
    r, c = any_grid.cell_index(coords[:, 0], coords[:, 1])
    rows = np.column_stack([rasters[m.name].values[r, c] for m in TGRA_FACTORS])
    labels = np.r_[np.ones(len(pos), dtype=np.int64), np.zeros(len(neg), dtype=np.int64)]
    return rasters, mask_grid, FactorTable(TGRA_FACTORS, rows, labels, coords)


def write_region(rasters, mask, table, directory) -> dict:
    """Write rasters, landslide mask and sample CSV; returns the written paths."""
    os.makedirs(os.path.join(directory, "rasters"), exist_ok=True)
    for name, grid in rasters.items():
        write_ascii_grid(grid, os.path.join(directory, "rasters", slug(name) + ".asc"))
    mask_path = os.path.join(directory, "landslides.asc")
    write_ascii_grid(mask, mask_path)
    samples_path = os.path.join(directory, "samples.csv")
    write_factor_table(table, samples_path)
    return {"rasters": os.path.join(directory, "rasters"), "landslides": mask_path, "samples": samples_path}


__all__ = ["synthetic_samples", "synthetic_region", "planted_table", "planted_logit", "write_region", "slug"]
