"""Per-replication accuracy metrics and their aggregation over replications."""

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from moe.ecm import ExpertParams, FitResult
from moe.errors import UsageError

from .scenarios import SimTruth


def align_labels(est: ExpertParams, truth: SimTruth) -> Tuple[int, ...]:
    """Permutation perm with est component perm[k] matched to true component k.

    Chosen to minimise sum_k ||beta_hat[perm[k]] - beta_k||^2; ties keep the
    first permutation in lexicographic order.
    """
    if est.K != truth.K:
        raise UsageError(f"estimate has K={est.K}, truth has K={truth.K}")
    best, best_cost = None, np.inf
    for perm in itertools.permutations(range(est.K)):
        cost = float(np.sum((est.beta[list(perm)] - truth.beta_true) ** 2))
        if cost < best_cost:
            best, best_cost = perm, cost
    return best


@dataclass
class ReplicationMetrics:
    squared_error: Dict[str, float]
    bias: Dict[str, float]
    mse_pi: float
    permutation: Tuple[int, ...] = ()


def _parameter_pairs(est: ExpertParams, truth: SimTruth) -> Dict[str, Tuple[float, float]]:
    pairs = {}
    for k in range(truth.K):
        for j in range(truth.beta_true.shape[1]):
            pairs[f"beta{k + 1}{j}"] = (float(est.beta[k, j]), float(truth.beta_true[k, j]))
    for k in range(truth.K):
        pairs[f"sigma{k + 1}"] = (float(np.sqrt(est.sigma2[k])), truth.sigma_true)
    if est.alpha is not None and truth.alpha_true is not None:
        for k in range(truth.K):
            pairs[f"alpha{k + 1}"] = (float(est.alpha[k]), truth.alpha_true)
            pairs[f"eta{k + 1}"] = (float(est.eta[k]), truth.eta_true)
    return pairs


def compute_metrics(fit: FitResult, truth: SimTruth) -> ReplicationMetrics:
    """Squared error and signed bias per parameter plus MSE of the fitted gate."""
    perm = align_labels(fit.params, truth)
    est = fit.params.permuted(perm)
    pi_hat = fit.fitted_pi[:, list(perm)]
    if pi_hat.shape != truth.pi_true.shape:
        raise UsageError(f"fitted proportions {pi_hat.shape} do not match truth {truth.pi_true.shape}")
    squared, bias = {}, {}
    for name, (estimate, true) in _parameter_pairs(est, truth).items():
        bias[name] = estimate - true
        squared[name] = bias[name] ** 2
    mse_pi = float(np.mean(np.sum((truth.pi_true - pi_hat) ** 2, axis=1)))
    return ReplicationMetrics(squared, bias, mse_pi, tuple(perm))


@dataclass
class MetricsTable:
    mse: Dict[str, float] = field(default_factory=dict)
    bias: Dict[str, float] = field(default_factory=dict)
    mse_pi_mean: float = float("nan")
    mse_pi_sd: float = float("nan")
    n_reps: int = 0

    @classmethod
    def aggregate(cls, records: List[ReplicationMetrics]) -> "MetricsTable":
        if not records:
            return cls()
        names = list(records[0].squared_error)
        mse = {name: float(np.mean([r.squared_error[name] for r in records])) for name in names}
        bias = {name: float(np.mean([r.bias[name] for r in records])) for name in names}
        pis = np.array([r.mse_pi for r in records])
        sd = float(np.std(pis, ddof=1)) if pis.size > 1 else 0.0
        return cls(mse, bias, float(pis.mean()), sd, len(records))

    def scaled(self, factor: float = 100.0) -> "MetricsTable":
        """Copy with every entry multiplied by ``factor`` (the x100 reporting convention)."""
        return MetricsTable(
            {k: v * factor for k, v in self.mse.items()},
            {k: v * factor for k, v in self.bias.items()},
            self.mse_pi_mean * factor,
            self.mse_pi_sd * factor,
            self.n_reps,
        )
