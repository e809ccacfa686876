"""Rank-R CP representation of a grid-sampled CDF and its evaluation.

A model is a per-dimension evaluation grid, N factor matrices whose columns
are discretized 1-D conditional CDFs, and a mixture weight vector on the
simplex.  The grid CDF value at a lattice point is
``sum_h weights[h] * prod_n factors[n][i_n, h]``; off-grid values come from
per-dimension linear interpolation of the factor columns.

Below the first cut-off of each dimension a virtual cut-off is prepended at
``c0 - (c1 - c0)`` with CDF value 0, so every query point has a finite
interpolation cell and the CDF reaches 0 continuously instead of stepping.
"""

import json
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .copula import MarginalTransform
from .errors import CapacityError
from .tensor_ops import DEFAULT_CELL_CAP, cp_tensor

__all__ = ["Grid", "ModelMeta", "CpdModel", "check_factor_matrix", "check_weights"]

CONTINUOUS = "continuous"
DISCRETE = "discrete"

WEIGHT_SUM_TOL = 1e-9
_EDGE_TOL = 1e-12


@dataclass(frozen=True)
class Grid:
    """Per-dimension sorted cut-off vectors defining the evaluation lattice."""

    cutoffs: tuple

    def __post_init__(self):
        cuts = tuple(np.asarray(c, dtype=float) for c in self.cutoffs)
        if not cuts:
            raise ValueError("grid needs at least one dimension")
        for n, c in enumerate(cuts):
            if c.ndim != 1 or c.size < 2:
                raise ValueError(f"dimension {n}: need at least two cut-offs")
            if np.any(np.diff(c) <= 0):
                raise ValueError(f"dimension {n}: cut-offs must be strictly increasing")
        object.__setattr__(self, "cutoffs", cuts)

    @property
    def ndim(self):
        return len(self.cutoffs)

    @property
    def shape(self):
        return tuple(c.size for c in self.cutoffs)

    def extended(self, n):
        """Cut-offs of dimension ``n`` with the virtual left edge prepended."""
        c = self.cutoffs[n]
        return np.concatenate(([2.0 * c[0] - c[1]], c))

    def cells(self):
        """Number of lattice points."""
        return int(np.prod([float(s) for s in self.shape]))


def check_factor_matrix(values):
    """Validate one factor matrix: entries in [0,1], non-decreasing columns, last row 1."""
    a = np.asarray(values, dtype=float)
    if a.ndim != 2 or a.size == 0:
        raise ValueError("factor matrix must be a non-empty 2-D array")
    if np.any(a < -_EDGE_TOL) or np.any(a > 1.0 + _EDGE_TOL):
        raise ValueError("factor entries must lie in [0, 1]")
    if np.any(np.diff(a, axis=0) < -_EDGE_TOL):
        raise ValueError("factor columns must be non-decreasing")
    if np.any(a[-1, :] != 1.0):
        raise ValueError("last row of every factor column must equal 1")
    return a


def check_weights(values):
    """Validate mixture weights: non-negative, summing to 1 within 1e-9."""
    w = np.asarray(values, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty vector")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
        raise ValueError("weights must sum to 1")
    return w


@dataclass(frozen=True)
class ModelMeta:
    """Optional per-variable metadata carried by a model.

    ``shift``/``scale`` record an affine standardization applied to the raw
    data before training (model space = (x - shift) / scale); inference maps
    through it transparently.
    """

    names: tuple | None = None
    kinds: tuple | None = None
    shift: tuple | None = None
    scale: tuple | None = None

    def kind(self, n):
        return self.kinds[n] if self.kinds is not None else CONTINUOUS


@dataclass(frozen=True)
class CpdModel:
    """Immutable rank-R CP model of a grid-sampled CDF.

    ``copula`` is present iff the model was trained on PIT-transformed data;
    entries may be None for pass-through (discrete) dimensions.  Arrays must
    not be mutated after construction; all evaluation methods are read-only
    and safe for concurrent use.
    """

    grid: Grid
    factors: tuple
    weights: np.ndarray
    copula: tuple | None = None
    meta: ModelMeta = field(default_factory=ModelMeta)

    def __post_init__(self):
        factors = tuple(check_factor_matrix(f) for f in self.factors)
        weights = check_weights(self.weights)
        if len(factors) != self.grid.ndim:
            raise ValueError("one factor matrix per grid dimension required")
        ranks = {f.shape[1] for f in factors}
        if len(ranks) != 1 or factors[0].shape[1] != weights.size:
            raise ValueError("all factors and weights must share the rank R")
        for n, f in enumerate(factors):
            if f.shape[0] != self.grid.shape[n]:
                raise ValueError(f"factor {n} rows must match grid cut-off count")
        if self.copula is not None and len(self.copula) != self.grid.ndim:
            raise ValueError("one marginal transform slot per dimension required")
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "weights", weights)

    @property
    def rank(self):
        return int(self.weights.size)

    @property
    def ndim(self):
        return self.grid.ndim

    @cached_property
    def _ext_factors(self):
        # factor columns with the virtual-edge zero row prepended
        return tuple(
            np.vstack([np.zeros((1, self.rank)), f]) for f in self.factors
        )

    @cached_property
    def _ext_cutoffs(self):
        return tuple(self.grid.extended(n) for n in range(self.ndim))

    def grid_value(self, idx):
        """CDF value at the lattice point ``idx`` (0-based indices)."""
        idx = tuple(int(i) for i in idx)
        if len(idx) != self.ndim:
            raise ValueError("index tuple must have one entry per dimension")
        acc = self.weights.copy()
        for n, i in enumerate(idx):
            if not 0 <= i < self.grid.shape[n]:
                raise IndexError(f"index {i} out of range for dimension {n}")
            acc = acc * self.factors[n][i, :]
        return float(acc.sum())

    def component_cdf(self, n, x):
        """Per-component CDF values of dimension ``n`` at scalar ``x``.

        Linear interpolation of the factor columns between cut-offs; 0 at or
        below the virtual left edge, 1 at or above the last cut-off.
        """
        e = self._ext_cutoffs[n]
        fe = self._ext_factors[n]
        if x >= e[-1]:
            return np.ones(self.rank)
        if x <= e[0]:
            return np.zeros(self.rank)
        j = int(np.searchsorted(e, x, side="right"))
        t = (x - e[j - 1]) / (e[j] - e[j - 1])
        return fe[j - 1] + t * (fe[j] - fe[j - 1])

    def component_density(self, n, x):
        """Per-component density of dimension ``n`` at scalar ``x``.

        Piecewise-constant cell slope of the interpolated CDF; 0 outside the
        extended grid range (below the virtual edge or above the last cut-off).
        """
        e = self._ext_cutoffs[n]
        fe = self._ext_factors[n]
        if x <= e[0] or x > e[-1]:
            return np.zeros(self.rank)
        j = int(np.searchsorted(e, x, side="left"))
        return (fe[j] - fe[j - 1]) / (e[j] - e[j - 1])

    def cell_masses(self, n):
        """Per-cell component masses of dimension ``n`` (first differences)."""
        return np.diff(self._ext_factors[n], axis=0)

    def cell_midpoints(self, n):
        """Midpoints of the extended cells of dimension ``n``."""
        e = self._ext_cutoffs[n]
        return 0.5 * (e[:-1] + e[1:])

    def cdf(self, x):
        """CDF at an arbitrary point ``x`` in model space."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.ndim,):
            raise ValueError("x must be an N-vector")
        acc = self.weights.copy()
        for n in range(self.ndim):
            acc = acc * self.component_cdf(n, x[n])
        return float(acc.sum())

    def materialize(self, max_cells=DEFAULT_CELL_CAP):
        """Dense tensor of grid CDF values over the full lattice."""
        if self.grid.cells() > max_cells:
            raise CapacityError(
                f"{self.grid.cells()} cells exceed cap {max_cells}"
            )
        return cp_tensor(self.weights, self.factors, max_cells=max_cells)

    def with_meta(self, meta):
        return replace(self, meta=meta)

    # -- serialization ----------------------------------------------------

    def to_dict(self):
        """JSON-ready dict; floats survive a round trip exactly."""
        copula = None
        if self.copula is not None:
            copula = [
                None
                if t is None
                else {
                    "knots": t.knots.tolist(),
                    "cdf": t.cdf_values.tolist(),
                    "count": t.n_samples,
                }
                for t in self.copula
            ]
        meta = {
            "names": list(self.meta.names) if self.meta.names else None,
            "kinds": list(self.meta.kinds) if self.meta.kinds else None,
            "shift": list(self.meta.shift) if self.meta.shift is not None else None,
            "scale": list(self.meta.scale) if self.meta.scale is not None else None,
        }
        return {
            "rank": self.rank,
            "grid": [c.tolist() for c in self.grid.cutoffs],
            "lambda": self.weights.tolist(),
            "factors": [f.T.tolist() for f in self.factors],
            "copula": copula,
            "meta": meta,
        }

    @classmethod
    def from_dict(cls, doc):
        grid = Grid(tuple(np.asarray(c, dtype=float) for c in doc["grid"]))
        factors = tuple(np.asarray(cols, dtype=float).T for cols in doc["factors"])
        weights = np.asarray(doc["lambda"], dtype=float)
        copula = None
        if doc.get("copula") is not None:
            copula = tuple(
                None
                if entry is None
                else MarginalTransform(
                    np.asarray(entry["knots"], dtype=float),
                    np.asarray(entry["cdf"], dtype=float),
                    int(entry["count"]),
                )
                for entry in doc["copula"]
            )
        m = doc.get("meta") or {}
        meta = ModelMeta(
            names=tuple(m["names"]) if m.get("names") else None,
            kinds=tuple(m["kinds"]) if m.get("kinds") else None,
            shift=tuple(m["shift"]) if m.get("shift") is not None else None,
            scale=tuple(m["scale"]) if m.get("scale") is not None else None,
        )
        return cls(grid=grid, factors=factors, weights=weights, copula=copula, meta=meta)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))
