"""Datasets, evaluation grids, and the empirical grid-sampled CDF.

The empirical CDF at a lattice point is the fraction of complete rows that
are componentwise less than or equal to the point's cut-offs.  Small problems
can materialize the full tensor with one sort-based sweep; larger ones query
points on demand.
"""

import csv
import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DegenerateColumnError, InsufficientDataError
from .model import CONTINUOUS, DISCRETE, Grid
from .tensor_ops import DEFAULT_CELL_CAP

__all__ = [
    "Dataset",
    "EmpiricalCdf",
    "build_grid",
    "empirical_at",
    "ecdf_at_points",
    "materialize_empirical",
    "read_csv",
    "write_csv",
]


@dataclass(frozen=True)
class Dataset:
    """An M x N sample matrix with per-column kinds and a missingness mask.

    ``mask`` marks missing cells with True; NaN entries are always treated as
    missing regardless of the mask.  ``kinds`` defaults to all-continuous.
    """

    samples: np.ndarray
    kinds: tuple | None = None
    mask: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ValueError("samples must be a non-empty M x N matrix")
        missing = np.isnan(x)
        if self.mask is not None:
            m = np.asarray(self.mask, dtype=bool)
            if m.shape != x.shape:
                raise ValueError("mask shape must match samples")
            missing = missing | m
        if self.kinds is not None:
            kinds = tuple(self.kinds)
            if len(kinds) != x.shape[1]:
                raise ValueError("one kind per column required")
            if any(k not in (CONTINUOUS, DISCRETE) for k in kinds):
                raise ValueError(f"kinds must be '{CONTINUOUS}' or '{DISCRETE}'")
            object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "mask", missing)

    @property
    def n_rows(self):
        return self.samples.shape[0]

    @property
    def n_dims(self):
        return self.samples.shape[1]

    def kind(self, n):
        return self.kinds[n] if self.kinds is not None else CONTINUOUS

    def complete_rows(self):
        """Rows without any missing entry."""
        return self.samples[~self.mask.any(axis=1)]

    def column_values(self, n):
        """Non-missing values of column ``n``."""
        col = self.samples[:, n]
        return col[~self.mask[:, n]]


def _quantile_subsample(distinct, levels):
    # equally spaced order statistics, always keeping min and max
    if distinct.size <= levels:
        return distinct
    idx = np.round(np.linspace(0, distinct.size - 1, levels)).astype(int)
    return distinct[idx]


def _kmeans_pp_init(x, k, rng):
    centers = np.empty(k)
    centers[0] = x[rng.integers(x.size)]
    d2 = (x - centers[0]) ** 2
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[j:] = x[rng.integers(x.size, size=k - j)]
            break
        probs = d2 / total
        centers[j] = x[rng.choice(x.size, p=probs)]
        d2 = np.minimum(d2, (x - centers[j]) ** 2)
    return np.sort(centers)


def _kmeans_1d(x, k, rng, restarts=50, max_iter=100):
    """Scalar k-means with k-means++ seeding; ties assign to the lower centroid."""
    best_centers = None
    best_inertia = np.inf
    for _ in range(restarts):
        centers = _kmeans_pp_init(x, k, rng)
        for _ in range(max_iter):
            # argmin picks the first (lowest) centroid on distance ties
            labels = np.argmin(np.abs(x[:, None] - centers[None, :]), axis=1)
            new = centers.copy()
            for j in range(k):
                sel = labels == j
                if np.any(sel):
                    new[j] = x[sel].mean()
            new.sort()
            if np.array_equal(new, centers):
                break
            centers = new
        labels = np.argmin(np.abs(x[:, None] - centers[None, :]), axis=1)
        inertia = float(((x - centers[labels]) ** 2).sum())
        if inertia < best_inertia - 1e-12:
            best_inertia = inertia
            best_centers = centers
    return best_centers


def build_grid(data, levels, reduction="full", seed=0):
    """Build an evaluation grid from data.

    ``levels`` is an int or per-dimension sequence of target cut-off counts.
    ``reduction='full'`` keeps the sorted distinct values, subsampled to the
    target count by equally spaced order statistics (endpoints preserved);
    ``'kmeans'`` uses sorted scalar k-means centroids.  Discrete columns
    always use their full sorted support.  A column needs at least two
    distinct values.
    """
    if reduction not in ("full", "kmeans"):
        raise ValueError("reduction must be 'full' or 'kmeans'")
    lv = np.broadcast_to(np.asarray(levels, dtype=int), (data.n_dims,))
    if np.any(lv < 2):
        raise ValueError("need at least two levels per dimension")
    rng = np.random.default_rng(seed)
    cutoffs = []
    for n in range(data.n_dims):
        vals = data.column_values(n)
        distinct = np.unique(vals)
        if distinct.size < 2:
            raise DegenerateColumnError(f"column {n} has fewer than two distinct values")
        if data.kind(n) == DISCRETE:
            cutoffs.append(distinct)
        elif reduction == "full" or lv[n] >= distinct.size:
            cutoffs.append(_quantile_subsample(distinct, int(lv[n])))
        else:
            centers = _kmeans_1d(vals, int(lv[n]), rng)
            cutoffs.append(np.unique(centers))
    return Grid(tuple(cutoffs))


def empirical_at(data, grid, idx):
    """Empirical CDF value at lattice point ``idx`` over the complete rows."""
    rows = data.complete_rows()
    if rows.shape[0] == 0:
        raise InsufficientDataError("no complete rows available")
    thresholds = np.empty(grid.ndim)
    for n, i in enumerate(idx):
        i = int(i)
        if not 0 <= i < grid.shape[n]:
            raise IndexError(f"index {i} out of range for dimension {n}")
        thresholds[n] = grid.cutoffs[n][i]
    return float(np.all(rows <= thresholds, axis=1).mean())


def ecdf_at_points(rows, grid, idx_matrix):
    """Empirical CDF of ``rows`` at many lattice points at once.

    ``idx_matrix`` has one index tuple per row; returns a vector of values.
    """
    rows = np.asarray(rows, dtype=float)
    if rows.shape[0] == 0:
        raise InsufficientDataError("no rows available")
    idx = np.asarray(idx_matrix, dtype=int)
    hits = np.ones((idx.shape[0], rows.shape[0]), dtype=bool)
    for n in range(grid.ndim):
        thr = grid.cutoffs[n][idx[:, n]]
        hits &= rows[None, :, n] <= thr[:, None]
    return hits.mean(axis=1)


@dataclass(frozen=True)
class EmpiricalCdf:
    """Grid-sampled empirical CDF, dense or evaluated on demand."""

    grid: Grid
    values: np.ndarray | None = None
    data: Dataset | None = None

    def __post_init__(self):
        if self.values is None and self.data is None:
            raise ValueError("need a dense tensor or a dataset handle")
        if self.values is not None:
            v = np.asarray(self.values, dtype=float)
            if v.shape != self.grid.shape:
                raise ValueError("dense values must match the grid shape")
            object.__setattr__(self, "values", v)

    def at(self, idx):
        if self.values is not None:
            return float(self.values[tuple(int(i) for i in idx)])
        return empirical_at(self.data, self.grid, idx)


def materialize_empirical(data, grid, max_cells=DEFAULT_CELL_CAP):
    """Dense empirical CDF tensor via a single counting sweep.

    Each complete row is binned at the first cut-off >= its value per
    dimension; cumulative sums over every mode then yield the counts of rows
    dominated by each lattice point.
    """
    cells = grid.cells()
    if cells > max_cells:
        raise CapacityError(f"{cells} cells exceed cap {max_cells}")
    rows = data.complete_rows()
    if rows.shape[0] == 0:
        raise InsufficientDataError("no complete rows available")
    shape = grid.shape
    ranks = np.empty(rows.shape, dtype=int)
    for n in range(grid.ndim):
        ranks[:, n] = np.searchsorted(grid.cutoffs[n], rows[:, n], side="left")
    inside = np.all(ranks < np.asarray(shape), axis=1)
    counts = np.zeros(shape)
    np.add.at(counts, tuple(ranks[inside].T), 1.0)
    for axis in range(grid.ndim):
        np.cumsum(counts, axis=axis, out=counts)
    return EmpiricalCdf(grid=grid, values=counts / rows.shape[0], data=data)


# -- CSV interface ---------------------------------------------------------


def read_csv(path, schema=None):
    """Load a headed CSV into a Dataset.

    ``schema`` is a JSON path or dict: ``{"kinds": {column: kind}, "missing":
    sentinel}``.  Unlisted columns default to continuous; cells equal to the
    sentinel (default: empty string) load as missing.  Values must be numeric.

    Returns
    -------
    (Dataset, list of column names)
    """
    kinds_map = {}
    sentinel = ""
    if schema is not None:
        if isinstance(schema, (str, bytes, os.PathLike)):
            with open(schema) as fh:
                schema = json.load(fh)
        kinds_map = schema.get("kinds", {})
        sentinel = schema.get("missing", "")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise ValueError(f"{path}: empty CSV")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields")
            vals = []
            for cell in rec:
                cell = cell.strip()
                if cell == sentinel or cell == "":
                    vals.append(np.nan)
                else:
                    vals.append(float(cell))
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    unknown = set(kinds_map) - set(header)
    if unknown:
        raise ValueError(f"schema names unknown columns: {sorted(unknown)}")
    kinds = tuple(kinds_map.get(name, CONTINUOUS) for name in header)
    return Dataset(np.asarray(rows, dtype=float), kinds=kinds), list(header)


def write_csv(path, header, rows, formats=None):
    """Write rows of floats (or strings) under a header; full float precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            out = []
            for j, cell in enumerate(row):
                if isinstance(cell, str):
                    out.append(cell)
                elif formats and formats[j]:
                    out.append(formats[j] % cell)
                else:
                    out.append(repr(float(cell)))
            writer.writerow(out)
