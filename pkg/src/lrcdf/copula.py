"""Per-variable probability integral transforms for the Copula variant.

Each variable is mapped through its estimated marginal CDF so the transformed
sample has (approximately) uniform marginals; the joint model is then fitted
in the unit cube and queries are mapped back through the inverse.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateColumnError

__all__ = ["MarginalTransform", "fit_marginal"]


@dataclass(frozen=True)
class MarginalTransform:
    """Empirical marginal CDF of one variable, with piecewise-linear inverse.

    ``cdf_values[j]`` is the scaled rank ``(# samples <= knots[j]) / (M + 1)``,
    which keeps every level strictly inside (0, 1).  The forward map clamps to
    ``[u_min, 1 - u_min]`` with ``u_min = 1 / (2 (M + 1))`` so that points
    outside the observed range still map to a usable interior level.
    """

    knots: np.ndarray
    cdf_values: np.ndarray
    n_samples: int

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        cdf = np.asarray(self.cdf_values, dtype=float)
        if knots.ndim != 1 or knots.size < 2:
            raise ValueError("need at least two knots")
        if knots.shape != cdf.shape:
            raise ValueError("knots and cdf_values must have equal length")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        if np.any(np.diff(cdf) <= 0) or cdf[0] <= 0 or cdf[-1] > 1:
            raise ValueError("cdf_values must be strictly increasing in (0, 1]")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "cdf_values", cdf)

    @property
    def u_min(self):
        return 1.0 / (2.0 * (self.n_samples + 1))

    def forward(self, x):
        """Map data values to CDF levels in ``[u_min, 1 - u_min]``."""
        return np.interp(
            x, self.knots, self.cdf_values, left=self.u_min, right=1.0 - self.u_min
        )

    def inverse(self, u):
        """Piecewise-linear inverse of :meth:`forward`.

        Levels outside the knot CDF range clamp to the extreme knots.
        """
        return np.interp(u, self.cdf_values, self.knots)

    def density(self, x):
        """Slope of the interpolated marginal CDF at ``x`` (0 outside the knots)."""
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        xv = np.atleast_1d(x)
        j = np.clip(np.searchsorted(self.knots, xv, side="left"), 1, self.knots.size - 1)
        slope = np.diff(self.cdf_values) / np.diff(self.knots)
        out = slope[j - 1]
        out = np.where((xv < self.knots[0]) | (xv > self.knots[-1]), 0.0, out)
        return float(out[0]) if scalar else out


def fit_marginal(column):
    """Fit a :class:`MarginalTransform` to one data column.

    Knot CDF levels follow the ``rank / (M + 1)`` convention, where rank
    counts all samples less than or equal to the knot.
    """
    col = np.asarray(column, dtype=float)
    col = col[~np.isnan(col)]
    if col.size < 2:
        raise DegenerateColumnError("marginal fit needs at least two samples")
    sorted_col = np.sort(col)
    knots = np.unique(sorted_col)
    if knots.size < 2:
        raise DegenerateColumnError("constant column has no usable marginal")
    ranks = np.searchsorted(sorted_col, knots, side="right")
    return MarginalTransform(knots, ranks / (col.size + 1.0), int(col.size))
