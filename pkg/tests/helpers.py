"""Shared test fixtures: random feasible models, toy generators, oracles."""

import itertools

import numpy as np

from lrcdf import CpdModel, Grid
from lrcdf.projections import simplex_project, valid_cdf_project_columns

# 3-D two-component Gaussian mixture used across recovery/imputation tests
MIX_MEANS = np.array([[-1.7, 0.45, -2.50], [1.8, 2.30, -1.20]])
MIX_STDS = np.array([[0.8, 1.4, 0.7], [1.3, 0.8, 0.8]])
MIX_WEIGHTS = np.array([0.5, 0.5])


def random_feasible_model(rng, shape, rank, cutoffs=None):
    """Random CP model satisfying all invariants: sorted-uniform columns."""
    factors = tuple(
        valid_cdf_project_columns(np.sort(rng.random((size, rank)), axis=0))
        for size in shape
    )
    weights = simplex_project(rng.random(rank) + 0.1)
    if cutoffs is None:
        cutoffs = tuple(np.sort(rng.normal(size=size)) * 2.0 for size in shape)
        cutoffs = tuple(np.unique(c) for c in cutoffs)
        # resample degenerate draws (ties are measure-zero but be safe)
        cutoffs = tuple(
            c if c.size == s else np.linspace(0.0, 1.0, s)
            for c, s in zip(cutoffs, shape)
        )
    return CpdModel(grid=Grid(cutoffs), factors=factors, weights=weights)


def separated_rank2_factors(rng, shape):
    """Well-separated smooth rank-2 CDF columns (logistic steps)."""
    factors = []
    for size in shape:
        t = np.linspace(0.0, 1.0, size)
        cols = []
        for center in rng.uniform(0.15, 0.45, 1).tolist() + rng.uniform(
            0.55, 0.85, 1
        ).tolist():
            width = rng.uniform(0.05, 0.2)
            c = 1.0 / (1.0 + np.exp(-(t - center) / width))
            c = (c - c[0]) / (c[-1] - c[0])
            c[-1] = 1.0
            cols.append(c)
        factors.append(np.column_stack(cols))
    return factors


def uniform_model(knots=11, ndim=2):
    """Rank-1 model of independent uniforms on [0, 1]^ndim."""
    cuts = np.linspace(0.0, 1.0, knots)
    col = cuts.copy()
    col[-1] = 1.0
    return CpdModel(
        grid=Grid((cuts,) * ndim),
        factors=(col[:, None],) * ndim,
        weights=np.array([1.0]),
    )


def best_permutation_error(model, gen_factors, gen_weights=None):
    """Max-abs factor (and weight) error minimized over column permutations."""
    rank = model.rank
    best = np.inf
    for p in itertools.permutations(range(rank)):
        d = max(
            np.abs(model.factors[n][:, list(p)] - gen_factors[n]).max()
            for n in range(model.ndim)
        )
        if gen_weights is not None:
            d = max(d, np.abs(model.weights[list(p)] - gen_weights).max())
        best = min(best, d)
    return best


# -- toy data generators -----------------------------------------------------


def moons(rng, count, noise=0.08):
    t = rng.uniform(0.0, np.pi, count // 2)
    outer = np.column_stack([np.cos(t), np.sin(t)])
    t = rng.uniform(0.0, np.pi, count - count // 2)
    inner = np.column_stack([1.0 - np.cos(t), 0.5 - np.sin(t)])
    return np.vstack([outer, inner]) + rng.normal(0.0, noise, (count, 2))


def circles(rng, count, noise=0.06):
    t = rng.uniform(0.0, 2.0 * np.pi, count)
    radius = np.where(rng.random(count) < 0.5, 1.0, 0.5)
    pts = np.column_stack([radius * np.cos(t), radius * np.sin(t)])
    return pts + rng.normal(0.0, noise, (count, 2))


def checkerboard(rng, count):
    # uniform over the dark squares of a 4x4 board on [-2, 2]^2
    cells = [(i, j) for i in range(4) for j in range(4) if (i + j) % 2 == 0]
    pick = rng.integers(0, len(cells), size=count)
    base = np.array([cells[k] for k in pick], dtype=float)
    return -2.0 + (base + rng.random((count, 2)))


def draw_mixture(rng, count):
    """Samples and component labels of the 3-D Gaussian mixture."""
    comp = (rng.random(count) < MIX_WEIGHTS[1]).astype(int)
    return rng.normal(MIX_MEANS[comp], MIX_STDS[comp]), comp


def mixture_logpdf(rows):
    from scipy.stats import norm

    rows = np.atleast_2d(rows)
    parts = []
    for k in range(2):
        logp = norm.logpdf(rows, loc=MIX_MEANS[k], scale=MIX_STDS[k]).sum(axis=1)
        parts.append(np.log(MIX_WEIGHTS[k]) + logp)
    return np.logaddexp(parts[0], parts[1])


def mixture_component_cdf(cutoffs, dim, component):
    from scipy.stats import norm

    return norm.cdf((cutoffs - MIX_MEANS[component, dim]) / MIX_STDS[component, dim])


def corner_sum_box(model, bounds, cdf=None):
    """Independent box-probability oracle: inclusion-exclusion over CDF corners."""
    cdf = cdf or model.cdf
    total = 0.0
    for picks in itertools.product((0, 1), repeat=model.ndim):
        corner = np.empty(model.ndim)
        sign = 1
        for n, pick in enumerate(picks):
            lo, hi = bounds[n] if bounds[n] is not None else (None, None)
            if pick == 0:
                corner[n] = -np.inf if lo is None else lo
                sign = -sign
            else:
                corner[n] = np.inf if hi is None else hi
        total += sign * cdf(corner)
    return total


def cell_mass_tensor(cdf_tensor):
    """Per-cell masses of a grid CDF tensor (first differences along every mode)."""
    out = cdf_tensor
    for axis in range(out.ndim):
        out = np.diff(out, axis=axis, prepend=0.0)
    return out


def cell_histogram(grid, points):
    """Fraction of points per grid cell; cell i is the slab up to cutoff i."""
    shape = grid.shape
    idx = np.empty(points.shape, dtype=int)
    for n in range(grid.ndim):
        pos = np.searchsorted(grid.cutoffs[n], points[:, n], side="left")
        idx[:, n] = np.clip(pos, 0, shape[n] - 1)
    counts = np.zeros(shape)
    np.add.at(counts, tuple(idx.T), 1.0)
    return counts / points.shape[0]
