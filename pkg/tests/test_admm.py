import json

import numpy as np
import pytest

from lrcdf import AdmmConfig, EmpiricalCdf, Grid, fit_admm
from lrcdf.tensor_ops import cp_tensor

from helpers import best_permutation_error, random_feasible_model, separated_rank2_factors


def emp_from(weights, factors):
    shape = tuple(f.shape[0] for f in factors)
    grid = Grid(tuple(np.linspace(0.0, 1.0, s) for s in shape))
    return EmpiricalCdf(grid=grid, values=cp_tensor(np.asarray(weights), factors))


def test_config_validation():
    with pytest.raises(ValueError):
        AdmmConfig(rank=0)
    with pytest.raises(ValueError):
        AdmmConfig(rank=2, rho=-1.0)
    with pytest.raises(ValueError):
        AdmmConfig(rank=2, tol_inner=0.0)


def test_requires_dense_tensor():
    rng = np.random.default_rng(0)
    model = random_feasible_model(rng, (4, 4), 1)
    from lrcdf import Dataset

    emp = EmpiricalCdf(grid=model.grid, data=Dataset(rng.random((5, 2))))
    with pytest.raises(ValueError):
        fit_admm(emp, AdmmConfig(rank=1))


def test_rank1_exact_recovery():
    cols = [np.array([0.2, 0.5, 0.8, 1.0]), np.array([0.1, 0.6, 1.0])]
    emp = emp_from([1.0], [c[:, None] for c in cols])
    objs = []
    model = fit_admm(
        emp,
        AdmmConfig(rank=1, outer_iters=200, tol_outer=1e-14, seed=0),
        callback=lambda i, o: objs.append(o),
    )
    assert objs[-1] < 1e-8
    for n, c in enumerate(cols):
        np.testing.assert_allclose(model.factors[n][:, 0], c, atol=1e-4)
    assert model.weights[0] == pytest.approx(1.0, abs=1e-9)


def test_rank2_synthetic_reconstruction():
    rng = np.random.default_rng(3)
    gen = separated_rank2_factors(rng, (20, 20, 20))
    weights = np.array([0.3, 0.7])
    emp = emp_from(weights, gen)
    model = fit_admm(
        emp, AdmmConfig(rank=2, outer_iters=400, tol_outer=1e-13, seed=1, inner_iters=100, tol_inner=1e-6)
    )
    rel = np.linalg.norm(model.materialize() - emp.values) / np.linalg.norm(emp.values)
    assert rel < 1e-3


def test_objective_non_increasing_within_slack():
    rng = np.random.default_rng(4)
    data_model = random_feasible_model(rng, (8, 8, 8), 3)
    emp = EmpiricalCdf(grid=data_model.grid, values=data_model.materialize())
    objs = []
    fit_admm(
        emp,
        AdmmConfig(rank=2, outer_iters=80, tol_outer=1e-14, seed=2),
        callback=lambda i, o: objs.append(o),
    )
    objs = np.array(objs)
    assert len(objs) > 2
    assert np.all(np.diff(objs) <= 1e-6 * max(1.0, objs[0]))


def test_feasibility_of_returned_model():
    # CpdModel construction enforces the invariants; check them explicitly too
    rng = np.random.default_rng(5)
    src = random_feasible_model(rng, (6, 5), 2)
    emp = EmpiricalCdf(grid=src.grid, values=src.materialize())
    for outer in (1, 3):
        model = fit_admm(emp, AdmmConfig(rank=2, outer_iters=outer, seed=0))
        for f in model.factors:
            assert np.all(f >= 0.0) and np.all(f <= 1.0)
            assert np.all(np.diff(f, axis=0) >= 0)
            assert np.all(f[-1, :] == 1.0)
        assert np.all(model.weights >= 0)
        assert abs(model.weights.sum() - 1.0) < 1e-9


def test_identifiability_two_seeds_recover_generator():
    rng = np.random.default_rng(6)
    gen = separated_rank2_factors(rng, (10, 10, 10))
    weights = np.array([0.4, 0.6])
    emp = emp_from(weights, gen)
    cfg = dict(outer_iters=600, tol_outer=1e-300, inner_iters=100, tol_inner=1e-6)
    for seed in (0, 1):
        model = fit_admm(emp, AdmmConfig(rank=2, seed=seed, **cfg))
        assert best_permutation_error(model, gen, weights) < 0.02


def test_deterministic_under_seed():
    rng = np.random.default_rng(7)
    src = random_feasible_model(rng, (6, 6), 2)
    emp = EmpiricalCdf(grid=src.grid, values=src.materialize())
    a = fit_admm(emp, AdmmConfig(rank=2, outer_iters=30, seed=9))
    b = fit_admm(emp, AdmmConfig(rank=2, outer_iters=30, seed=9))
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())


def test_callback_receives_progress():
    rng = np.random.default_rng(8)
    src = random_feasible_model(rng, (5, 5), 1)
    emp = EmpiricalCdf(grid=src.grid, values=src.materialize())
    seen = []
    fit_admm(emp, AdmmConfig(rank=1, outer_iters=10, seed=0), callback=lambda i, o: seen.append((i, o)))
    assert seen and seen[0][0] == 0
    assert all(np.isfinite(o) for _, o in seen)
