"""Stochastic fitting of the CP model from sampled lattice points.

Never materializes the CDF tensor: each step draws a batch of lattice
points, computes their empirical CDF targets from the training rows, and
applies one Adam update on the exact gradient of the squared error, followed
by the valid-CDF column and simplex projections.  Early stopping tracks the
MSE against the held-out rows' empirical CDF on a fixed set of lattice
points; the best parameters seen are returned.
"""

from dataclasses import dataclass

import numpy as np

from .admm import init_factors
from .empirical import ecdf_at_points
from .errors import ConfigError, DivergenceError
from .model import CpdModel, ModelMeta
from .projections import simplex_project, valid_cdf_project
from .tensor_ops import DEFAULT_CELL_CAP

__all__ = ["SgdConfig", "fit_sgd", "batch_loss_and_grads"]

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
EVAL_EVERY = 50
VAL_POINTS = 2048


@dataclass
class SgdConfig:
    """Settings for :func:`fit_sgd`.

    ``levels`` is carried for grid construction by callers and is not used by
    the fitter itself.  ``point_sampling`` picks the lattice points of each
    batch uniformly at random ("grid", default) or at the cells of randomly
    drawn training rows ("data").  ``target_rows``, when set, estimates batch
    targets from that many randomly drawn training rows instead of the full
    training set -- faster but noisier.
    """

    rank: int
    levels: int | tuple | None = None
    batch_size: int = 128
    learning_rate: float = 0.01
    max_iter: int = 20000
    patience: int = 20
    val_fraction: float = 0.2
    seed: int = 0
    point_sampling: str = "grid"
    target_rows: int | None = None

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.patience < 1:
            raise ValueError("patience must be at least 1")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in (0, 1)")
        if self.point_sampling not in ("grid", "data"):
            raise ValueError("point_sampling must be 'grid' or 'data'")


def batch_loss_and_grads(factors, weights, idx, targets):
    """Squared-error batch loss and its exact gradients.

    Loss is the mean over the batch of ``(model(idx_b) - targets[b])**2``
    where ``model(i) = sum_h weights[h] prod_n factors[n][i_n, h]``.

    Returns
    -------
    (loss, grad_weights, list of per-factor gradients)
        Factor gradients are dense arrays; rows not referenced by the batch
        are zero.
    """
    idx = np.asarray(idx, dtype=int)
    targets = np.asarray(targets, dtype=float)
    batch, ndim = idx.shape
    rank = weights.size

    rows = [factors[n][idx[:, n], :] for n in range(ndim)]
    prefix = [np.ones((batch, rank))]
    for n in range(ndim - 1):
        prefix.append(prefix[-1] * rows[n])
    suffix = [np.ones((batch, rank))]
    for n in range(ndim - 1, 0, -1):
        suffix.append(suffix[-1] * rows[n])
    suffix.reverse()

    prods = prefix[-1] * rows[-1]
    preds = prods @ weights
    err = preds - targets
    loss = float(np.mean(err * err))

    coef = (2.0 / batch) * err
    grad_w = prods.T @ coef
    grads = []
    for n in range(ndim):
        contrib = coef[:, None] * weights[None, :] * prefix[n] * suffix[n]
        g = np.zeros_like(factors[n])
        np.add.at(g, idx[:, n], contrib)
        grads.append(g)
    return loss, grad_w, grads


def _adam_step(param, grad, m, v, t, lr):
    m *= ADAM_BETA1
    m += (1.0 - ADAM_BETA1) * grad
    v *= ADAM_BETA2
    v += (1.0 - ADAM_BETA2) * grad * grad
    m_hat = m / (1.0 - ADAM_BETA1**t)
    v_hat = v / (1.0 - ADAM_BETA2**t)
    param -= lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


def _sample_lattice(rng, shape, count):
    cols = [rng.integers(0, size, size=count) for size in shape]
    return np.stack(cols, axis=1)


def _rows_to_cells(rows, grid):
    idx = np.empty(rows.shape, dtype=int)
    for n in range(grid.ndim):
        pos = np.searchsorted(grid.cutoffs[n], rows[:, n], side="left")
        idx[:, n] = np.minimum(pos, grid.shape[n] - 1)
    return idx


def fit_sgd(data, grid, cfg, callback=None):
    """Fit a CP model by projected Adam on sampled lattice points.

    Complete rows are split into training and validation parts by
    ``cfg.val_fraction``.  Training batches target the training rows'
    empirical CDF; validation MSE targets the held-out rows' empirical CDF on
    a fixed random set of lattice points (the full lattice when small), is
    evaluated every ``EVAL_EVERY`` steps, and stops the run after
    ``cfg.patience`` evaluations without improvement.

    Parameters
    ----------
    data : Dataset
    grid : Grid
    cfg : SgdConfig
    callback : callable, optional
        Called as ``callback(step, validation_mse)`` at each evaluation.

    Returns
    -------
    CpdModel -- the parameters with the best validation MSE seen.
    """
    rows = data.complete_rows()
    m_total = rows.shape[0]
    rng = np.random.default_rng(cfg.seed)

    n_val = int(m_total * cfg.val_fraction)
    if n_val < 1 or m_total - n_val < 1:
        raise ConfigError("validation split leaves an empty train or validation set")
    perm = rng.permutation(m_total)
    val_rows = rows[perm[:n_val]]
    train_rows = rows[perm[n_val:]]

    shape = grid.shape
    if grid.cells() <= min(VAL_POINTS, DEFAULT_CELL_CAP):
        val_idx = np.stack(
            [a.ravel() for a in np.meshgrid(*[np.arange(s) for s in shape], indexing="ij")],
            axis=1,
        )
    else:
        val_idx = _sample_lattice(rng, shape, VAL_POINTS)
    val_targets = ecdf_at_points(val_rows, grid, val_idx)

    factors, lam = init_factors(shape, cfg.rank, rng)
    moments = [(np.zeros_like(f), np.zeros_like(f)) for f in factors]
    lam_m, lam_v = np.zeros_like(lam), np.zeros_like(lam)

    def val_mse():
        preds = np.ones((val_idx.shape[0], cfg.rank))
        for n in range(grid.ndim):
            preds *= factors[n][val_idx[:, n], :]
        diff = preds @ lam - val_targets
        return float(np.mean(diff * diff))

    best_mse = val_mse()
    best = ([f.copy() for f in factors], lam.copy())
    if callback is not None:
        callback(0, best_mse)
    stale = 0

    for step in range(1, cfg.max_iter + 1):
        if cfg.point_sampling == "data":
            picks = rng.integers(0, train_rows.shape[0], size=cfg.batch_size)
            idx = _rows_to_cells(train_rows[picks], grid)
        else:
            idx = _sample_lattice(rng, shape, cfg.batch_size)
        if cfg.target_rows is not None:
            picks = rng.integers(0, train_rows.shape[0], size=cfg.target_rows)
            target_pool = train_rows[picks]
        else:
            target_pool = train_rows
        targets = ecdf_at_points(target_pool, grid, idx)

        loss, grad_w, grads = batch_loss_and_grads(factors, lam, idx, targets)
        if not np.isfinite(loss):
            raise DivergenceError("non-finite batch loss")

        _adam_step(lam, grad_w, lam_m, lam_v, step, cfg.learning_rate)
        for n in range(grid.ndim):
            _adam_step(factors[n], grads[n], *moments[n], step, cfg.learning_rate)
            for h in range(cfg.rank):
                factors[n][:, h] = valid_cdf_project(factors[n][:, h])
        lam[:] = simplex_project(lam)

        if step % EVAL_EVERY == 0:
            mse = val_mse()
            if callback is not None:
                callback(step, mse)
            if mse < best_mse:
                best_mse = mse
                best = ([f.copy() for f in factors], lam.copy())
                stale = 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    break

    best_factors, best_lam = best
    meta = ModelMeta(kinds=data.kinds) if data.kinds is not None else ModelMeta()
    return CpdModel(grid=grid, factors=tuple(best_factors), weights=best_lam, meta=meta)
