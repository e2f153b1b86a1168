from types import SimpleNamespace

import numpy as np
import pytest

from moe.clustering import classify, classify_posteriors
from moe.ecm import ModelConfig, Posteriors
from moe.errors import UsageError


def test_map_label_and_outlier_flag():
    Z = np.array([[0.8, 0.2], [0.1, 0.9], [0.6, 0.4]])
    V = np.array([[0.9, 0.1], [0.99, 0.3], [0.2, 0.9]])
    report = classify_posteriors(Z, V, contaminated=True)
    np.testing.assert_array_equal(report.labels, [0, 1, 0])
    # outlier status is read from the assigned component only
    np.testing.assert_array_equal(report.outlier, [False, True, True])
    assert report.n_outliers == 2
    np.testing.assert_array_equal(report.counts(), [2, 1])


def test_ties_go_to_lowest_index():
    Z = np.array([[0.5, 0.5], [0.25, 0.25]])
    report = classify_posteriors(Z, np.ones_like(Z), contaminated=True)
    np.testing.assert_array_equal(report.labels, [0, 0])


def test_threshold_is_strict():
    Z = np.array([[1.0, 0.0]])
    V = np.array([[0.5, 1.0]])
    assert not classify_posteriors(Z, V, True, threshold=0.5).outlier[0]
    assert classify_posteriors(Z, V, True, threshold=0.6).outlier[0]


def test_gaussian_family_has_no_outliers():
    Z = np.array([[0.3, 0.7]])
    report = classify_posteriors(Z, np.zeros_like(Z), contaminated=False)
    assert report.n_outliers == 0


def test_input_validation():
    with pytest.raises(UsageError):
        classify_posteriors(np.ones((2, 2)), np.ones((2, 3)), True)
    with pytest.raises(UsageError):
        classify_posteriors(np.ones((2, 2)), np.ones((2, 2)), True, threshold=1.0)


def test_classify_fit_object(caplog):
    Z = np.array([[0.9, 0.1], [0.2, 0.8]])
    V = np.array([[0.1, 1.0], [1.0, 1.0]])
    fake = SimpleNamespace(
        converged=False,
        n_iter=500,
        posteriors=Posteriors(Z, V),
        config=ModelConfig.for_model("cgmlr", 2),
    )
    with caplog.at_level("WARNING"):
        report = classify(fake)
    assert "did not converge" in caplog.text
    np.testing.assert_array_equal(report.labels, [0, 1])
    np.testing.assert_array_equal(report.outlier, [True, False])


def test_scenario_d_noise_is_flagged():
    from moe.ecm import fit
    from simulation.scenarios import ScenarioConfig, generate

    d, truth = generate(ScenarioConfig("d", 300, seed=21))
    result = fit(d, ModelConfig.for_model("cgmlr", 2, n_restarts=3))
    report = classify(result)
    flagged = set(np.flatnonzero(report.outlier))
    far = [i for i in truth.replaced if min(abs(d.y[i] - d.X[i] @ b) for b in truth.beta_true) > 6]
    assert far
    assert sum(i in flagged for i in far) >= 0.8 * len(far)


def test_raising_threshold_only_adds_outliers():
    rng = np.random.default_rng(9)
    Z = rng.dirichlet(np.ones(3), size=200)
    V = rng.uniform(size=(200, 3))
    previous = np.zeros(200, dtype=bool)
    for threshold in (0.05, 0.2, 0.5, 0.7, 0.95):
        report = classify_posteriors(Z, V, contaminated=True, threshold=threshold)
        assert np.all(report.outlier[previous])
        previous = report.outlier
    assert previous.sum() > 0
