"""Two-line simulation scenarios with a smooth covariate-dependent gate."""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from moe.errors import UsageError
from moe.regression import Dataset

SCENARIOS = ("a", "b", "c", "d")
BETA_TRUE = np.array([[0.0, 1.0], [4.0, 1.0]])
CONTAMINATION_ALPHA = 0.95
CONTAMINATION_ETA = 20.0
T_DF = 3
NOISE_FRACTION = 0.1
NOISE_RANGE = (-15.0, 15.0)


def pi1_fn(x):
    """Probability of component 1: 0.1 + 0.8 sin(pi x)."""
    return 0.1 + 0.8 * np.sin(np.pi * np.asarray(x, dtype=float))


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    n: int
    seed: int = 0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise UsageError(f"unknown scenario {self.scenario!r}; valid: {', '.join(SCENARIOS)}")
        if self.n < 50:
            raise UsageError(f"scenario sample size must be >= 50, got {self.n}")


@dataclass(frozen=True, eq=False)
class SimTruth:
    beta_true: np.ndarray
    sigma_true: float
    alpha_true: Optional[float]
    eta_true: Optional[float]
    z_true: np.ndarray
    pi_true: np.ndarray
    replaced: np.ndarray

    @property
    def K(self) -> int:
        return self.beta_true.shape[0]


def _errors(scenario: str, n: int, rng: np.random.Generator) -> np.ndarray:
    if scenario == "b":
        inflated = rng.uniform(size=n) >= CONTAMINATION_ALPHA
        scale = np.where(inflated, math.sqrt(CONTAMINATION_ETA), 1.0)
        return rng.standard_normal(n) * scale
    if scenario == "c":
        return rng.standard_t(T_DF, size=n)
    return rng.standard_normal(n)


def generate(cfg: ScenarioConfig) -> Tuple[Dataset, SimTruth]:
    rng = np.random.default_rng(cfg.seed)
    x = rng.uniform(0.0, 1.0, size=cfg.n)
    pi1 = pi1_fn(x)
    z = np.where(rng.uniform(size=cfg.n) < pi1, 0, 1)
    y = BETA_TRUE[z, 0] + BETA_TRUE[z, 1] * x + _errors(cfg.scenario, cfg.n, rng)

    replaced = np.array([], dtype=int)
    if cfg.scenario == "d":
        replaced = np.sort(rng.choice(cfg.n, size=int(math.floor(NOISE_FRACTION * cfg.n)), replace=False))
        y[replaced] = rng.uniform(*NOISE_RANGE, size=replaced.shape[0])

    contaminated = cfg.scenario == "b"
    truth = SimTruth(
        beta_true=BETA_TRUE.copy(),
        sigma_true=1.0,
        alpha_true=CONTAMINATION_ALPHA if contaminated else None,
        eta_true=CONTAMINATION_ETA if contaminated else None,
        z_true=z,
        pi_true=np.column_stack([pi1, 1.0 - pi1]),
        replaced=replaced,
    )
    return Dataset.from_columns(y, x), truth
