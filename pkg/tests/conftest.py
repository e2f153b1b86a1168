import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "src"))

from moe.regression import Dataset  # noqa: E402
from simulation.scenarios import ScenarioConfig, generate  # noqa: E402

TONE_CSV = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data", "tonedata.csv")


@pytest.fixture
def scenario_a():
    return generate(ScenarioConfig("a", 300, seed=11))


@pytest.fixture
def scenario_b():
    return generate(ScenarioConfig("b", 300, seed=12))


@pytest.fixture
def line_data():
    """Single noisy line, 40 points."""
    rng = np.random.default_rng(5)
    x = rng.uniform(0, 1, 40)
    y = 1.0 + 2.0 * x + rng.normal(0, 0.3, 40)
    return Dataset.from_columns(y, x)


@pytest.fixture
def tone_path():
    if not os.path.exists(TONE_CSV):
        pytest.skip("data/tonedata.csv not present (see data/README.md)")
    return TONE_CSV


def write_dataset_csv(path, d, y_col="y", x_col="x"):
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{y_col},{x_col}\n")
        for yi, xi in zip(d.y, d.X[:, 1]):
            f.write(f"{float(yi)!r},{float(xi)!r}\n")
    return str(path)
