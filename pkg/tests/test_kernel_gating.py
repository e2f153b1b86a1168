import numpy as np
import pytest

import moe.kernel_gating as kg
from moe.errors import BoundaryDegeneracyWarning, UsageError
from moe.kernel_gating import (
    EPS,
    GridSpec,
    KernelSpec,
    cross_validate_bandwidth,
    cv_folds,
    default_bandwidth,
    estimate_curves,
    local_linear_estimate,
    select_bandwidth_cv,
)


def test_kernel_spec_validation():
    with pytest.raises(UsageError):
        KernelSpec(0.0)
    with pytest.raises(UsageError):
        KernelSpec(0.1, family="epanechnikov")
    k = KernelSpec(0.5)
    assert k.scaled(0.0) == pytest.approx(1.0 / (0.5 * np.sqrt(2 * np.pi)))


@pytest.mark.parametrize("seed", range(10))
def test_local_linear_reproduces_affine(seed):
    rng = np.random.default_rng(seed)
    t = np.sort(rng.uniform(0, 1, 80))
    a, b = rng.normal(size=2)
    h = rng.uniform(0.05, 0.3)
    k = KernelSpec(h)
    for u in np.linspace(0.1, 0.9, 9):
        assert local_linear_estimate(t, np.full(80, a), u, k) == pytest.approx(a, abs=1e-9)
        assert local_linear_estimate(t, a + b * t, u, k) == pytest.approx(a + b * u, abs=1e-9)


def test_constant_soft_labels_give_constant_curves():
    t = np.linspace(0, 1, 50)
    Z = np.tile([0.3, 0.7], (50, 1))
    g = estimate_curves(t, Z, GridSpec.uniform(t), KernelSpec(0.1))
    np.testing.assert_allclose(g.values, np.tile([0.3, 0.7], (g.grid.m, 1)), atol=1e-12)
    np.testing.assert_allclose(g.at_data, Z, atol=1e-12)


def test_curves_are_valid_proportions():
    rng = np.random.default_rng(3)
    t = rng.uniform(0, 1, 120)
    Z = rng.dirichlet(np.ones(3) * 0.3, size=120)
    g = estimate_curves(t, Z, GridSpec.uniform(t, 40), KernelSpec(0.05))
    for P in (g.values, g.at_data, g.evaluate(rng.uniform(-0.5, 1.5, 30))):
        np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
        assert P.min() >= EPS * (1 - 1e-9)
        assert P.max() <= 1 - EPS * (1 - 1e-9)


def test_interpolation_exact_at_grid_points():
    rng = np.random.default_rng(4)
    t = rng.uniform(0, 1, 60)
    Z = rng.dirichlet(np.ones(2), size=60)
    g = estimate_curves(t, Z, GridSpec.uniform(t, 25), KernelSpec(0.15))
    np.testing.assert_array_equal(g.evaluate(g.grid.points), g.values)


def test_observed_grid_matches_data():
    t = np.array([0.3, 0.1, 0.3, 0.9, 0.5])
    grid = GridSpec.from_observed(t)
    np.testing.assert_array_equal(grid.points, [0.1, 0.3, 0.5, 0.9])
    assert GridSpec.uniform(np.linspace(0, 1, 500)).m == 100


def test_grid_must_cover_data():
    t = np.linspace(0, 1, 20)
    Z = np.full((20, 2), 0.5)
    with pytest.raises(UsageError):
        estimate_curves(t, Z, GridSpec(np.linspace(0.2, 1, 5)), KernelSpec(0.1))
    with pytest.raises(UsageError):
        GridSpec([0.0, 0.0, 1.0])


def test_isolated_point_falls_back_to_local_constant():
    t = np.concatenate([np.zeros(10), np.ones(10)])
    z = np.concatenate([np.full(10, 0.2), np.full(10, 0.9)])
    with pytest.warns(BoundaryDegeneracyWarning):
        value = local_linear_estimate(t, z, 0.0, KernelSpec(0.01))
    assert value == pytest.approx(0.2)


def test_default_bandwidth():
    t = np.random.default_rng(0).normal(size=200)
    assert default_bandwidth(t) == pytest.approx(1.06 * np.std(t, ddof=1) * 200 ** -0.2)


def test_cv_folds_are_contiguous_t_blocks():
    np.testing.assert_array_equal(cv_folds(np.linspace(0, 1, 10), 2), [0] * 5 + [1] * 5)
    t = np.random.default_rng(1).uniform(0, 1, 53)
    ids = cv_folds(t, 5)
    counts = np.bincount(ids)
    assert counts.max() - counts.min() <= 1
    assert np.all(np.diff(ids[np.argsort(t)]) >= 0)
    for f in range(4):
        assert t[ids == f].max() < t[ids == f + 1].min()


def _small_data(scenario_a):
    d, _ = scenario_a
    return d.subset(np.arange(120))


def test_single_bandwidth_is_selected(scenario_a):
    from moe.ecm import ModelConfig

    d = _small_data(scenario_a)
    cfg = ModelConfig.for_model("scgmoe", 2, bandwidth=0.1, n_restarts=1, max_iter=50)
    assert select_bandwidth_cv(d, 2, [0.2], folds=3, fit_config=cfg) == 0.2


def test_cv_report_shape(scenario_a):
    from moe.ecm import ModelConfig

    d = _small_data(scenario_a)
    cfg = ModelConfig.for_model("sgmoe", 2, bandwidth=0.1, n_restarts=1, max_iter=50)
    result = cross_validate_bandwidth(d, 2, [0.1, 0.3], folds=2, fit_config=cfg)
    assert result.scores.shape == (2, 2)
    assert result.selected in (0.1, 0.3)
    np.testing.assert_allclose(result.mean_scores, result.scores.mean(axis=1))


def test_ties_go_to_larger_bandwidth(monkeypatch, line_data):
    monkeypatch.setattr(kg, "_cv_cell", lambda d, fold_ids, fold, cfg: -1.0)
    assert select_bandwidth_cv(line_data, 2, [0.1, 0.2, 0.4], folds=2) == 0.4


def test_cv_usage_errors(line_data):
    with pytest.raises(UsageError):
        cross_validate_bandwidth(line_data, 2, [0.1], folds=line_data.n + 1)
    with pytest.raises(UsageError):
        cross_validate_bandwidth(line_data, 2, [0.2, 0.1])
    with pytest.raises(UsageError):
        cross_validate_bandwidth(line_data, 2, [0.1], folds=1)


def test_curves_get_smoother_as_bandwidth_grows(scenario_a):
    d, truth = scenario_a
    Z = np.eye(2)[truth.z_true]
    grid = GridSpec.uniform(d.t)
    tv = [np.abs(np.diff(estimate_curves(d.t, Z, grid, KernelSpec(h)).values[:, 0])).sum() for h in (0.03, 0.1, 0.3)]
    assert tv[0] >= tv[1] >= tv[2]


def test_held_out_points_beyond_grid_take_edge_values():
    rng = np.random.default_rng(8)
    t = rng.uniform(0.2, 0.8, 60)
    g = estimate_curves(t, rng.dirichlet(np.ones(2), size=60), GridSpec.uniform(t, 20), KernelSpec(0.1))
    np.testing.assert_array_equal(g.evaluate([0.0, 1.0]), g.values[[0, -1]])
