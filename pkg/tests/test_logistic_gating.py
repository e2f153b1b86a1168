import numpy as np
import pytest
from scipy.optimize import minimize
from scipy.special import softmax

from moe.errors import UsageError
from moe.logistic_gating import (
    COEF_CAP,
    LogisticGating,
    fit_gating,
    gating_design,
    gating_gradient,
    gating_hessian,
    gating_objective,
    softmax_gating,
)


def _soft_labels(n=200, seed=0):
    rng = np.random.default_rng(seed)
    t = rng.uniform(0, 1, n)
    p1 = 1.0 / (1.0 + np.exp(-(4.0 * t - 2.0)))
    z1 = np.clip(p1 + rng.normal(0, 0.1, n), 0.01, 0.99)
    return gating_design(t), np.column_stack([z1, 1.0 - z1])


def test_zero_gamma_is_uniform():
    T = gating_design(np.linspace(0, 1, 5))
    pi = softmax_gating(T, LogisticGating.zeros(3))
    np.testing.assert_allclose(pi, 1.0 / 3.0)


def test_rows_sum_to_one_for_extreme_coefficients():
    T = gating_design(np.linspace(-50, 50, 11))
    pi = softmax_gating(T, LogisticGating(np.array([[30.0, 30.0], [-30.0, 30.0]])))
    np.testing.assert_allclose(pi.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(np.isfinite(pi))


def test_gradient_matches_finite_differences():
    T, Z = _soft_labels()
    gamma = np.array([[0.3, -0.7]])
    grad = gating_gradient(T, Z, gamma)
    eps = 1e-6
    numeric = []
    for j in range(2):
        step = np.zeros_like(gamma)
        step[0, j] = eps
        numeric.append((gating_objective(T, Z, gamma + step) - gating_objective(T, Z, gamma - step)) / (2 * eps))
    np.testing.assert_allclose(grad, numeric, rtol=1e-5)


def test_fit_matches_generic_optimizer():
    T, Z = _soft_labels()
    trace = []
    g = fit_gating(T, Z, LogisticGating.zeros(2), trace=trace)
    oracle = minimize(lambda v: -gating_objective(T, Z, v.reshape(1, 2)), np.zeros(2), method="Nelder-Mead",
                      options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000})
    assert gating_objective(T, Z, g.gamma) >= -oracle.fun - 1e-6
    assert all(b >= a - 1e-12 for a, b in zip(trace, trace[1:]))


def test_separable_labels_stay_capped():
    t = np.linspace(0, 1, 40)
    z1 = (t < 0.5).astype(float)
    g = fit_gating(gating_design(t), np.column_stack([z1, 1.0 - z1]), LogisticGating.zeros(2))
    assert np.all(np.abs(g.gamma) <= COEF_CAP)


def test_three_components_shapes():
    rng = np.random.default_rng(1)
    T = gating_design(rng.uniform(0, 1, 60))
    Z = rng.dirichlet(np.ones(3), size=60)
    g = fit_gating(T, Z, LogisticGating.zeros(3))
    assert g.gamma.shape == (2, 2)
    assert g.K == 3 and g.q == 1


def test_shape_errors():
    T = gating_design(np.linspace(0, 1, 10))
    with pytest.raises(UsageError):
        fit_gating(T, np.ones((10, 3)) / 3, LogisticGating.zeros(2))
    with pytest.raises(UsageError):
        LogisticGating(np.array([[np.inf, 0.0]]))


def test_hessian_matches_finite_differences():
    rng = np.random.default_rng(2)
    T = gating_design(rng.uniform(0, 1, 150))
    Z = rng.dirichlet(np.ones(3), size=150)
    gamma = np.array([[0.4, -1.1], [-0.2, 0.8]])
    eps = 1e-6
    numeric = np.empty((4, 4))
    for j in range(4):
        step = np.zeros(4)
        step[j] = eps
        plus = gating_gradient(T, Z, gamma + step.reshape(2, 2))
        minus = gating_gradient(T, Z, gamma - step.reshape(2, 2))
        numeric[:, j] = (plus - minus) / (2 * eps)
    np.testing.assert_allclose(gating_hessian(T, Z, gamma), numeric, rtol=1e-4, atol=1e-6)


def test_reference_parameterization_matches_shifted_softmax():
    rng = np.random.default_rng(7)
    T = gating_design(rng.uniform(-1, 1, 30))
    g = LogisticGating(rng.normal(size=(2, 2)))
    logits = np.column_stack([T @ g.gamma.T, np.zeros(30)])
    shift = T @ rng.normal(size=2)
    np.testing.assert_allclose(softmax_gating(T, g), softmax(logits + shift[:, None], axis=1), atol=1e-12)


def test_intercept_only_example():
    T = np.ones((4, 1))
    pi = softmax_gating(T, LogisticGating(np.array([[np.log(3.0)]])))
    np.testing.assert_allclose(pi, np.tile([0.75, 0.25], (4, 1)), atol=1e-15)


def test_balanced_labels_keep_zero_coefficients():
    T = np.ones((20, 1))
    g = fit_gating(T, np.full((20, 2), 0.5), LogisticGating.zeros(2, n_coef=1))
    np.testing.assert_array_equal(g.gamma, [[0.0]])
