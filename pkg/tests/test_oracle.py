import numpy as np
import pytest

from extremesim import oracle
from extremesim.errors import SizeGuardError
from extremesim.objective import objective
from extremesim.synthetic import random_instance, toy_t1

from conftest import rel


def test_toy_value():
    data, theta = toy_t1()
    assert oracle.naive_objective(theta, data) == pytest.approx(4.813262, abs=5e-7)


def test_regulariser_only_cases():
    data, theta = random_instance(1, nnz=0, omega=0.0, lam=0.4)
    assert oracle.naive_objective(theta, data) == pytest.approx(0.2 * theta @ theta, rel=1e-14)
    np.testing.assert_allclose(oracle.naive_gradient(theta, data), 0.4 * theta, rtol=1e-14)


def test_gradient_matches_differences_of_naive_objective():
    data, theta = random_instance(21)
    g = oracle.naive_gradient(theta, data)
    h = 1e-6
    fd = np.array([
        (oracle.naive_objective(theta + h * e, data) - oracle.naive_objective(theta - h * e, data)) / (2 * h)
        for e in np.eye(theta.size)
    ])
    assert rel(g, fd) <= 1e-5


def test_gn_matrix_columns_and_symmetry():
    data, theta = random_instance(22)
    G = oracle.naive_gn_matrix(theta, data)
    assert np.abs(G - G.T).max() <= 1e-12 * np.abs(G).max()
    t = theta.size // 2
    e = np.zeros(theta.size)
    e[t] = 1.0
    np.testing.assert_array_equal(oracle.naive_gn_product(theta, e, data), G[:, t])


def test_explicit_jacobian_shapes():
    data, theta = random_instance(23)
    jac = oracle.explicit_jacobian(theta, data)
    assert jac.left.shape == (data.m, data.k, data.model.d_left)
    assert jac.right.shape == (data.n, data.k, data.model.d_right)


def test_loss_minus_equals_gramian_form():
    data, theta = random_instance(24, omega=1.0)
    _, c = objective(theta, data)
    assert rel(c.loss_minus, oracle.naive_loss_minus(theta, data)) <= 1e-10


def test_size_guards():
    data, theta = random_instance(0, m=120, n=100, k=2, hidden=(2, 2))
    with pytest.raises(SizeGuardError):
        oracle.naive_objective(theta, data)
    data, theta = random_instance(0, m=4, n=4, k=8, hidden=(40, 40), input_mode="dense")
    with pytest.raises(SizeGuardError):
        oracle.naive_gn_matrix(theta, data)
