"""Raster grids and ESRI ASCII grid I/O.

Row 0 of ``values`` is the northernmost row, matching the file layout.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "NODATA_value")


@dataclass(frozen=True, eq=False)
class RasterGrid:
    ncols: int
    nrows: int
    xllcorner: float
    yllcorner: float
    cellsize: float
    nodata: float
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (self.nrows, self.ncols):
            raise ValueError(f"values shape {values.shape} does not match nrows={self.nrows}, ncols={self.ncols}")
        if self.ncols < 1 or self.nrows < 1:
            raise ValueError("ncols and nrows must be positive")
        if not self.cellsize > 0:
            raise ValueError("cellsize must be positive")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def like(cls, template: "RasterGrid", values, nodata=None) -> "RasterGrid":
        """A grid with the georeferencing of ``template`` and new values."""
        return cls(template.ncols, template.nrows, template.xllcorner, template.yllcorner,
                   template.cellsize, template.nodata if nodata is None else nodata, values)

    @property
    def valid(self) -> np.ndarray:
        """Boolean mask of cells holding data."""
        v = self.values
        return np.isfinite(v) & (v != self.nodata)

    def cell_centers(self):
        """(x, y) arrays of cell-centre coordinates, shaped like ``values``."""
        cols = np.arange(self.ncols)
        rows = np.arange(self.nrows)
        x = self.xllcorner + (cols + 0.5) * self.cellsize
        y = self.yllcorner + (self.nrows - rows - 0.5) * self.cellsize
        return np.meshgrid(x, y)

    def cell_index(self, x, y):
        """Row and column indices of the cells containing points (x, y); -1 when outside."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        col = np.floor((x - self.xllcorner) / self.cellsize).astype(np.int64)
        row = self.nrows - 1 - np.floor((y - self.yllcorner) / self.cellsize).astype(np.int64)
        inside = (col >= 0) & (col < self.ncols) & (row >= 0) & (row < self.nrows)
        return np.where(inside, row, -1), np.where(inside, col, -1)

    def sample(self, x, y) -> np.ndarray:
        """Values at points (x, y); NaN outside the grid or on nodata cells."""
        row, col = self.cell_index(x, y)
        out = np.full(row.shape, np.nan)
        ok = row >= 0
        vals = self.values[row[ok], col[ok]]
        vals = np.where(vals == self.nodata, np.nan, vals)
        out[ok] = vals
        return out


def format_number(v) -> str:
    """Shortest text that parses back to exactly ``v``."""
    v = float(v)
    if v.is_integer() and abs(v) < 1e15 and not (v == 0 and math.copysign(1.0, v) < 0):
        return str(int(v))
    return repr(v)


def write_ascii_grid(grid: RasterGrid, path) -> None:
    """Write ``grid`` as an ESRI ASCII grid; values that are NaN are written as nodata."""
    header = (grid.ncols, grid.nrows, grid.xllcorner, grid.yllcorner, grid.cellsize, grid.nodata)
    nodata_text = format_number(grid.nodata)
    lines = [f"{key} {format_number(val)}" for key, val in zip(HEADER_KEYS, header)]
    for row in grid.values:
        lines.append(" ".join(nodata_text if not np.isfinite(v) else format_number(v) for v in row))
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write ASCII grid to {os.fspath(path)}: {exc}") from exc


def read_ascii_grid(path) -> RasterGrid:
    """Read an ESRI ASCII grid. Keywords are case-insensitive; ``xllcenter`` is accepted."""
    try:
        with open(path, encoding="ascii") as fh:
            tokens = fh.read().split()
    except OSError as exc:
        raise OSError(f"cannot read ASCII grid {os.fspath(path)}: {exc}") from exc
    header = {}
    pos = 0
    while pos + 1 < len(tokens) and tokens[pos][0].isalpha():
        header[tokens[pos].lower()] = tokens[pos + 1]
        pos += 2
    try:
        ncols = int(header["ncols"])
        nrows = int(header["nrows"])
        cellsize = float(header["cellsize"])
        nodata = float(header.get("nodata_value", "-9999"))
        if "xllcorner" in header:
            xll = float(header["xllcorner"])
        else:
            xll = float(header["xllcenter"]) - cellsize / 2
        if "yllcorner" in header:
            yll = float(header["yllcorner"])
        else:
            yll = float(header["yllcenter"]) - cellsize / 2
    except KeyError as exc:
        raise ValueError(f"{os.fspath(path)}: missing header keyword {exc.args[0]}") from None
    body = tokens[pos:]
    if len(body) != ncols * nrows:
        raise ValueError(f"{os.fspath(path)}: expected {ncols * nrows} values, found {len(body)}")
    values = np.array([float(t) for t in body], dtype=np.float64).reshape(nrows, ncols)
    return RasterGrid(ncols, nrows, xll, yll, cellsize, nodata, values)
