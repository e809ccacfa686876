"""Alternating optimization with ADMM inner solves on a dense CDF tensor.

Each outer iteration cycles over the factor matrices and then the mixture
weights.  The mode-n subproblem is a least-squares fit of the unfolded tensor
against the Khatri-Rao design of the remaining factors (weights absorbed),
solved by ADMM with the valid-CDF column projection as the feasibility step;
the weight subproblem uses the same splitting with a simplex projection.
Gram matrices are accumulated as Hadamard products of per-factor Grams, so
no Khatri-Rao matrix is ever materialized.

Alternating updates crawl when factor columns are nearly collinear, which is
endemic here (every column is a monotone curve ending at 1).  Each cycle
therefore tries a projected extrapolation along the last parameter change and
keeps it only when the objective strictly improves, so the objective sequence
stays non-increasing.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError
from .model import CpdModel, ModelMeta
from .projections import simplex_project, valid_cdf_project_columns
from .tensor_ops import full_contraction, mttkrp

__all__ = ["AdmmConfig", "fit_admm", "init_factors"]


@dataclass
class AdmmConfig:
    """Settings for :func:`fit_admm`.

    ``rho=None`` selects the penalty per subproblem as trace(G)/R where G is
    the subproblem Gram matrix.
    """

    rank: int
    outer_iters: int = 200
    inner_iters: int = 50
    rho: float | None = None
    tol_outer: float = 1e-8
    tol_inner: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be at least 1")
        if self.rho is not None and self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.tol_outer <= 0 or self.tol_inner <= 0:
            raise ValueError("tolerances must be positive")
        if self.outer_iters < 1 or self.inner_iters < 1:
            raise ValueError("iteration caps must be at least 1")


def init_factors(shape, rank, rng):
    """Random feasible start: sorted uniform columns, projected; uniform weights."""
    factors = []
    for size in shape:
        a = np.sort(rng.random((size, rank)), axis=0)
        factors.append(valid_cdf_project_columns(a))
    return factors, np.full(rank, 1.0 / rank)


def _admm_matrix(target_w, gram, z, dual, project, rho, iters, tol):
    """Solve min ||X - A H^T||^2 over the projected set via scaled ADMM.

    ``target_w`` is X H and ``gram`` is H^T H.  ``z``/``dual`` warm-start the
    split variable and scaled dual; returns the feasible iterate and dual.
    """
    lhs = gram + rho * np.eye(gram.shape[0])
    for _ in range(iters):
        a = np.linalg.solve(lhs, (target_w + rho * (z - dual)).T).T
        z_prev = z
        z = project(a + dual)
        dual = dual + a - z
        r = np.linalg.norm(a - z) / max(np.linalg.norm(z), 1e-12)
        s = np.linalg.norm(z - z_prev) / max(np.linalg.norm(z_prev), 1e-12)
        if r < tol and s < tol:
            break
    return z, dual


def fit_admm(emp, cfg, callback=None):
    """Fit a CP model to a dense empirical CDF tensor.

    Parameters
    ----------
    emp : EmpiricalCdf
        Must carry a dense tensor (``emp.values``).
    cfg : AdmmConfig
    callback : callable, optional
        Called as ``callback(iteration, objective)`` after each outer cycle.

    Returns
    -------
    CpdModel

    Raises
    ------
    DivergenceError
        If the objective becomes non-finite.
    """
    if emp.values is None:
        raise ValueError("fit_admm needs a materialized empirical CDF")
    x = emp.values
    shape = x.shape
    rank = cfg.rank
    rng = np.random.default_rng(cfg.seed)

    factors, lam = init_factors(shape, rank, rng)
    grams = [f.T @ f for f in factors]
    duals = [np.zeros_like(f) for f in factors]
    lam_dual = np.zeros((1, rank))
    norm_x2 = float((x * x).sum())

    def penalty(gram):
        if cfg.rho is not None:
            return cfg.rho
        return max(np.trace(gram) / rank, 1e-12)

    def objective(fs, lm):
        w = full_contraction(x, fs)
        g = np.multiply.reduce([f.T @ f for f in fs])
        return max(norm_x2 - 2.0 * (w @ lm) + lm @ g @ lm, 0.0)

    obj_prev = None
    prev = None
    beta = 1.0
    for it in range(cfg.outer_iters):
        for n in range(len(shape)):
            w = mttkrp(x, factors, n) * lam[None, :]
            gram = np.multiply.reduce([g for k, g in enumerate(grams) if k != n])
            gram = gram * np.outer(lam, lam)
            factors[n], duals[n] = _admm_matrix(
                w,
                gram,
                factors[n],
                duals[n],
                valid_cdf_project_columns,
                penalty(gram),
                cfg.inner_iters,
                cfg.tol_inner,
            )
            grams[n] = factors[n].T @ factors[n]

        w_all = full_contraction(x, factors)
        gram_all = np.multiply.reduce(grams)
        lam_mat, lam_dual = _admm_matrix(
            w_all[None, :],
            gram_all,
            lam[None, :],
            lam_dual,
            lambda m: simplex_project(m[0])[None, :],
            penalty(gram_all),
            cfg.inner_iters,
            cfg.tol_inner,
        )
        lam = lam_mat[0]

        obj = max(norm_x2 - 2.0 * (w_all @ lam) + lam @ gram_all @ lam, 0.0)
        if prev is not None:
            prev_factors, prev_lam = prev
            trial_factors = [
                valid_cdf_project_columns(f + beta * (f - p))
                for f, p in zip(factors, prev_factors)
            ]
            trial_lam = simplex_project(lam + beta * (lam - prev_lam))
            trial_obj = objective(trial_factors, trial_lam)
            prev = ([f.copy() for f in factors], lam.copy())
            if trial_obj < obj:
                factors, lam, obj = trial_factors, trial_lam, trial_obj
                grams = [f.T @ f for f in factors]
                beta = min(beta * 1.1, 8.0)
            else:
                beta = max(beta * 0.5, 0.5)
        else:
            prev = ([f.copy() for f in factors], lam.copy())

        if not np.isfinite(obj):
            raise DivergenceError("non-finite objective in AO-ADMM")
        if callback is not None:
            callback(it, obj)
        if obj_prev is not None and abs(obj_prev - obj) <= cfg.tol_outer * max(obj_prev, 1e-15):
            break
        obj_prev = obj

    meta = ModelMeta()
    if emp.data is not None and emp.data.kinds is not None:
        meta = ModelMeta(kinds=emp.data.kinds)
    return CpdModel(grid=emp.grid, factors=tuple(factors), weights=lam, meta=meta)
