"""Closed-form probabilistic queries against a fitted CP model.

Everything here follows from the hidden-component reading of the model: a
component h is drawn with probability ``weights[h]`` and each variable is
then drawn independently from the discretized conditional CDF stored in the
h-th factor column.  Marginalization drops factors, conditioning reweights
components, densities are per-cell slopes of the interpolated CDF columns,
and axis-aligned box probabilities multiply per-dimension CDF differences.

All functions accept raw-space inputs.  Models trained on standardized or
PIT-transformed data map through the stored transforms internally; see the
individual functions for which results stay in model space.
"""

from dataclasses import dataclass

import numpy as np

from .empirical import Dataset
from .errors import InsufficientDataError, ZeroLikelihoodError
from .model import CpdModel, DISCRETE, Grid, ModelMeta

__all__ = [
    "BoxQuery",
    "marginalize",
    "density",
    "log_likelihood",
    "box_probability",
    "posterior",
    "impute",
    "classify",
    "sample",
    "conditional_moments",
]

EPS_PDF = 1e-300


@dataclass(frozen=True)
class BoxQuery:
    """Axis-aligned box ``(a_n, b_n]`` per dimension; None means unbounded.

    Each entry of ``bounds`` is either None (the whole axis) or a pair
    ``(low, high)`` where either side may be None for a semi-infinite box.
    """

    bounds: tuple

    def __post_init__(self):
        checked = []
        for n, b in enumerate(self.bounds):
            if b is None:
                checked.append(None)
                continue
            lo, hi = b
            if lo is not None and hi is not None and not lo < hi:
                raise ValueError(f"dimension {n}: box needs low < high")
            checked.append((lo, hi))
        object.__setattr__(self, "bounds", tuple(checked))


# -- transform plumbing ------------------------------------------------------


def _to_model_space(model, n, x):
    if model.copula is not None and model.copula[n] is not None:
        return float(model.copula[n].forward(x))
    if model.meta.shift is not None:
        return (x - model.meta.shift[n]) / model.meta.scale[n]
    return x


def _from_model_space(model, n, u):
    if model.copula is not None and model.copula[n] is not None:
        return float(model.copula[n].inverse(u))
    if model.meta.shift is not None:
        return model.meta.shift[n] + model.meta.scale[n] * u
    return u


def _log_jacobian(model, x):
    """Log derivative of the raw-to-model-space map at x, summed over dims."""
    total = 0.0
    for n in range(model.ndim):
        if model.copula is not None and model.copula[n] is not None:
            total += np.log(max(model.copula[n].density(x[n]), EPS_PDF))
        elif model.meta.scale is not None:
            total -= np.log(model.meta.scale[n])
    return total


def _cell_positions(model, n):
    """Raw-space representative positions of the cells of dimension ``n``.

    Category values for discrete dimensions, extended-cell midpoints mapped
    back through the stored transforms for continuous ones.
    """
    if model.meta.kind(n) == DISCRETE:
        return model.grid.cutoffs[n]
    mids = model.cell_midpoints(n)
    return np.array([_from_model_space(model, n, u) for u in mids])


# -- queries -----------------------------------------------------------------


def marginalize(model, keep):
    """Model of the kept dimensions only; drops the other factor matrices.

    The marginal grid CDF equals the full model's CDF with dropped dimensions
    sent to their last cut-off.  Mixture weights are unchanged.
    """
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ValueError("keep must name at least one dimension")
    if keep[0] < 0 or keep[-1] >= model.ndim:
        raise ValueError("keep indexes out of range")

    def subset(seq):
        return None if seq is None else tuple(seq[k] for k in keep)

    meta = ModelMeta(
        names=subset(model.meta.names),
        kinds=subset(model.meta.kinds),
        shift=subset(model.meta.shift),
        scale=subset(model.meta.scale),
    )
    return CpdModel(
        grid=Grid(subset(model.grid.cutoffs)),
        factors=subset(model.factors),
        weights=model.weights,
        copula=subset(model.copula),
        meta=meta,
    )


def density(model, x):
    """Model-space density at ``x`` (raw coordinates).

    Product of per-dimension cell slopes, mixed over components; zero outside
    the extended grid range.  For standardized or Copula models this is the
    density of the transformed variables; :func:`log_likelihood` adds the
    transform Jacobians.
    """
    x = np.asarray(x, dtype=float)
    acc = model.weights.copy()
    for n in range(model.ndim):
        acc = acc * model.component_density(n, _to_model_space(model, n, x[n]))
        if not acc.any():
            return 0.0
    return float(acc.sum())


def log_likelihood(model, data):
    """Mean log density per complete row, including transform Jacobians.

    The model-space density is floored at ``EPS_PDF`` before the log.  For
    Copula models the log of the interpolated marginal densities is added;
    for standardized models the affine Jacobian is added.
    """
    rows = data.complete_rows() if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != model.ndim:
        raise ValueError("data must be rows of N values")
    if rows.shape[0] == 0:
        raise InsufficientDataError("no complete rows to evaluate")
    total = 0.0
    for row in rows:
        total += np.log(max(density(model, row), EPS_PDF)) + _log_jacobian(model, row)
    return float(total / rows.shape[0])


def box_probability(model, query):
    """Probability of an axis-aligned box, one CDF difference per dimension."""
    if not isinstance(query, BoxQuery):
        query = BoxQuery(tuple(query))
    if len(query.bounds) != model.ndim:
        raise ValueError("one bound entry per dimension required")
    acc = model.weights.copy()
    for n, b in enumerate(query.bounds):
        lo, hi = (None, None) if b is None else b
        hi_v = (
            np.ones(model.rank)
            if hi is None
            else model.component_cdf(n, _to_model_space(model, n, hi))
        )
        lo_v = (
            np.zeros(model.rank)
            if lo is None
            else model.component_cdf(n, _to_model_space(model, n, lo))
        )
        acc = acc * (hi_v - lo_v)
    return float(acc.sum())


def _discrete_mass(model, n, value):
    cuts = model.grid.cutoffs[n]
    j = int(np.searchsorted(cuts, value))
    for cand in (j - 1, j):
        if 0 <= cand < cuts.size and np.isclose(cuts[cand], value, rtol=1e-9, atol=1e-12):
            return model.cell_masses(n)[cand]
    return np.zeros(model.rank)


def posterior(model, evidence, on_zero="error"):
    """Component weights given observed values for a subset of dimensions.

    ``evidence`` maps dimension index to observed value.  Continuous evidence
    contributes its per-component cell density, discrete evidence its
    per-component category mass.  ``on_zero`` picks the policy when every
    component assigns zero likelihood: "error" raises
    :class:`ZeroLikelihoodError`, "uniform" falls back to uniform weights.

    Returns
    -------
    ndarray, shape (R,) -- non-negative, summing to 1.
    """
    if not evidence:
        raise ValueError("evidence must name at least one dimension")
    if on_zero not in ("error", "uniform"):
        raise ValueError("on_zero must be 'error' or 'uniform'")
    w = model.weights.copy()
    for n, value in evidence.items():
        n = int(n)
        if not 0 <= n < model.ndim:
            raise ValueError(f"evidence dimension {n} out of range")
        if model.meta.kind(n) == DISCRETE:
            w = w * _discrete_mass(model, n, value)
        else:
            w = w * model.component_density(n, _to_model_space(model, n, value))
    total = w.sum()
    if total <= 0 or not np.isfinite(total):
        if on_zero == "uniform":
            return np.full(model.rank, 1.0 / model.rank)
        raise ZeroLikelihoodError("evidence has zero likelihood under the model")
    return w / total


def impute(model, x, on_zero="error"):
    """Fill missing (NaN) entries with their conditional expectations.

    The component posterior is computed from the observed entries; each
    missing entry becomes the posterior mixture of per-component cell-rule
    expectations (category values for discrete dimensions, extended-cell
    midpoints for continuous ones).  For Copula models the expectation is
    taken in transform space and mapped back through the inverse marginal.
    """
    x = np.asarray(x, dtype=float).copy()
    if x.shape != (model.ndim,):
        raise ValueError("x must be an N-vector")
    missing = np.isnan(x)
    if not missing.any():
        return x
    if missing.all():
        raise ValueError("impute needs at least one observed entry")
    evidence = {n: x[n] for n in range(model.ndim) if not missing[n]}
    w = posterior(model, evidence, on_zero=on_zero)
    for n in np.flatnonzero(missing):
        if model.meta.kind(n) == DISCRETE:
            positions = model.grid.cutoffs[n]
            x[n] = positions @ model.cell_masses(n) @ w
        else:
            mean_model = model.cell_midpoints(n) @ model.cell_masses(n) @ w
            x[n] = _from_model_space(model, n, mean_model)
    return x


def classify(model, x, label_dim, on_zero="error"):
    """Label posterior for a feature assignment; missing features are skipped.

    ``x`` is an N-vector whose ``label_dim`` entry is ignored (it may be NaN).
    With no observed features the prior mixture is used.  Ties break toward
    the smaller class index.

    Returns
    -------
    (label_value, ndarray of class probabilities over the label support)
    """
    label_dim = int(label_dim)
    if model.meta.kind(label_dim) != DISCRETE:
        raise ValueError("label dimension must be discrete")
    x = np.asarray(x, dtype=float)
    evidence = {
        n: x[n]
        for n in range(model.ndim)
        if n != label_dim and not np.isnan(x[n])
    }
    w = posterior(model, evidence, on_zero=on_zero) if evidence else model.weights
    probs = model.cell_masses(label_dim) @ w
    best = int(np.argmax(probs))
    return float(model.grid.cutoffs[label_dim][best]), probs


def _invert_column(ext_cutoffs, ext_column, u, discrete_values=None):
    """Inverse of one interpolated CDF column at levels ``u``."""
    j = np.clip(np.searchsorted(ext_column, u, side="left"), 1, ext_column.size - 1)
    if discrete_values is not None:
        return discrete_values[j - 1]
    lo, hi = ext_column[j - 1], ext_column[j]
    denom = hi - lo
    t = np.where(denom > 0, (u - lo) / np.where(denom > 0, denom, 1.0), 0.0)
    return ext_cutoffs[j - 1] + t * (ext_cutoffs[j] - ext_cutoffs[j - 1])


def sample(model, count, seed=0):
    """Draw ``count`` raw-space samples by component then inverse-CDF per dim.

    ``seed`` may be an int or a ``numpy.random.Generator``.  Continuous
    coordinates invert the linearly interpolated column CDF within the
    bracketing cell; discrete coordinates return the category value.
    """
    if count < 1:
        raise ValueError("count must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    comps = rng.choice(model.rank, size=count, p=model.weights)
    out = np.empty((count, model.ndim))
    for n in range(model.ndim):
        u = rng.random(count)
        ext_c = model.grid.extended(n)
        ext_f = np.vstack([np.zeros((1, model.rank)), model.factors[n]])
        discrete = model.grid.cutoffs[n] if model.meta.kind(n) == DISCRETE else None
        vals = np.empty(count)
        for h in range(model.rank):
            sel = comps == h
            if np.any(sel):
                vals[sel] = _invert_column(ext_c, ext_f[:, h], u[sel], discrete)
        if discrete is None and (model.copula is not None or model.meta.shift is not None):
            vals = np.array([_from_model_space(model, n, v) for v in vals])
        out[:, n] = vals
    return out


def conditional_moments(model, evidence, dim, on_zero="error"):
    """Conditional mean and variance of one dimension given evidence.

    Uses the same cell rules as :func:`impute` with cell positions mapped to
    raw space, treating each cell's mass as a point mass at its position.
    With empty evidence the prior mixture is used.
    """
    dim = int(dim)
    w = posterior(model, evidence, on_zero=on_zero) if evidence else model.weights
    positions = _cell_positions(model, dim)
    masses = model.cell_masses(dim)
    mean_h = positions @ masses
    second_h = (positions**2) @ masses
    mean = float(mean_h @ w)
    var = float(second_h @ w - mean**2)
    return mean, max(var, 0.0)
