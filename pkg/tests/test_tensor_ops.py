import numpy as np
import pytest

from lrcdf.errors import CapacityError
from lrcdf.tensor_ops import cp_tensor, full_contraction, khatri_rao, mttkrp, unfold

from helpers import random_feasible_model


def test_khatri_rao_first_matrix_fastest():
    a = np.array([[1.0], [2.0]])
    b = np.array([[10.0], [100.0]])
    # rows enumerate (i_a, i_b) with i_a fastest
    np.testing.assert_allclose(khatri_rao([a, b]), [[10.0], [20.0], [100.0], [200.0]])


def test_unfold_pairs_with_khatri_rao():
    # the unfolding convention and the Khatri-Rao ordering must reproduce the
    # CP identity X_(n) = A_n diag(w) KR(others ascending)^T for every mode
    rng = np.random.default_rng(0)
    model = random_feasible_model(rng, (4, 3, 5), 2)
    tensor = cp_tensor(model.weights, model.factors)
    for n in range(3):
        others = [f for k, f in enumerate(model.factors) if k != n]
        design = khatri_rao(others) * model.weights[None, :]
        np.testing.assert_allclose(
            unfold(tensor, n), model.factors[n] @ design.T, atol=1e-12
        )


def test_mttkrp_matches_explicit_product():
    rng = np.random.default_rng(1)
    model = random_feasible_model(rng, (3, 4, 2, 3), 3)
    tensor = cp_tensor(model.weights, model.factors)
    for n in range(4):
        others = [f for k, f in enumerate(model.factors) if k != n]
        expected = unfold(tensor, n) @ khatri_rao(others)
        np.testing.assert_allclose(mttkrp(tensor, model.factors, n), expected, atol=1e-12)


def test_full_contraction_matches_vec_inner_products():
    rng = np.random.default_rng(2)
    model = random_feasible_model(rng, (3, 4, 5), 2)
    tensor = rng.random((3, 4, 5))
    design = khatri_rao(list(model.factors))
    expected = design.T @ tensor.reshape(-1, order="F")
    np.testing.assert_allclose(full_contraction(tensor, model.factors), expected, atol=1e-12)


def test_cp_tensor_elementwise():
    rng = np.random.default_rng(3)
    model = random_feasible_model(rng, (3, 3), 2)
    tensor = cp_tensor(model.weights, model.factors)
    for i in range(3):
        for j in range(3):
            manual = sum(
                model.weights[h] * model.factors[0][i, h] * model.factors[1][j, h]
                for h in range(2)
            )
            assert tensor[i, j] == pytest.approx(manual, abs=1e-12)


def test_cp_tensor_capacity_error():
    rng = np.random.default_rng(4)
    model = random_feasible_model(rng, (8, 8, 8), 1)
    with pytest.raises(CapacityError):
        cp_tensor(model.weights, model.factors, max_cells=100)
