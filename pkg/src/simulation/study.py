"""Seeded replication runner over (scenario, n, model) cells."""

import logging
import sys
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from joblib import Parallel, delayed

from moe.ecm import MODEL_KINDS, ModelConfig, fit
from moe.errors import MixtureError, UsageError
from moe.kernel_gating import default_bandwidth, default_h_grid, select_bandwidth_cv

from .metrics import MetricsTable, compute_metrics
from .scenarios import SCENARIOS, ScenarioConfig, generate

logger = logging.getLogger(__name__)

K_TRUE = 2


def replication_seed(master_seed: int, scenario: str, n: int, rep: int) -> int:
    """Data seed shared by every model in a replication, so model comparisons are paired."""
    ss = np.random.SeedSequence([master_seed, SCENARIOS.index(scenario), n, rep])
    return int(ss.generate_state(1)[0])


def _bandwidth_for(d, bandwidth: Union[str, float], restarts: int, seed: int) -> float:
    if bandwidth == "default":
        return default_bandwidth(d.t)
    if bandwidth == "cv":
        h0 = default_bandwidth(d.t)
        template = ModelConfig.for_model("scgmoe", K_TRUE, bandwidth=h0, n_restarts=restarts, seed=seed)
        return select_bandwidth_cv(d, K_TRUE, default_h_grid(d.t), fit_config=template)
    return float(bandwidth)


def run_replication(scenario: str, n: int, model: str, rep: int, master_seed: int,
                    restarts: int = 10, bandwidth: Union[str, float] = "default") -> Dict:
    """One fit on one simulated dataset; failures are returned as records, never raised."""
    seed = replication_seed(master_seed, scenario, n, rep)
    record = {"scenario": scenario, "n": n, "model": model, "rep": rep, "seed": seed}
    d, truth = generate(ScenarioConfig(scenario, n, seed))
    try:
        h = None
        if MODEL_KINDS[model][1] == "nonparametric":
            h = _bandwidth_for(d, bandwidth, restarts, seed)
        cfg = ModelConfig.for_model(model, K_TRUE, bandwidth=h, n_restarts=restarts, seed=seed)
        result = fit(d, cfg)
    except MixtureError as exc:
        record.update(status="failed", error=str(exc).splitlines()[0])
        return record
    metrics = compute_metrics(result, truth)
    record.update(
        status="ok",
        bandwidth=h,
        converged=result.converged,
        loglik=result.loglik,
        bic=result.bic,
        mse_pi=metrics.mse_pi,
        squared_error=metrics.squared_error,
        bias=metrics.bias,
        metrics=metrics,
    )
    return record


@dataclass
class StudyCell:
    scenario: str
    n: int
    model: str
    table: MetricsTable
    n_failed: int


@dataclass
class StudyReport:
    master_seed: int
    reps: int
    records: List[Dict] = field(default_factory=list)
    cells: List[StudyCell] = field(default_factory=list)

    def cell(self, scenario: str, n: int, model: str) -> Optional[StudyCell]:
        for c in self.cells:
            if (c.scenario, c.n, c.model) == (scenario, n, model):
                return c
        return None


def run_study(
    scenarios: Sequence[str],
    n_values: Sequence[int],
    models: Sequence[str],
    reps: int = 100,
    seed: int = 0,
    n_jobs: int = 1,
    restarts: int = 10,
    bandwidth: Union[str, float] = "default",
    progress: bool = True,
) -> StudyReport:
    for s in scenarios:
        if s not in SCENARIOS:
            raise UsageError(f"unknown scenario {s!r}; valid: {', '.join(SCENARIOS)}")
    for m in models:
        if m not in MODEL_KINDS:
            raise UsageError(f"unknown model {m!r}; valid: {', '.join(MODEL_KINDS)}")
    if reps < 1:
        raise UsageError(f"reps must be >= 1, got {reps}")

    report = StudyReport(master_seed=seed, reps=reps)
    cells = [(s, n, m) for s in scenarios for n in n_values for m in models]
    start_time = time.time()
    for i, (scenario, n, model) in enumerate(cells, start=1):
        records = Parallel(n_jobs=n_jobs)(
            delayed(run_replication)(scenario, n, model, rep, seed, restarts, bandwidth) for rep in range(reps)
        )
        ok = [r for r in records if r["status"] == "ok"]
        failed = len(records) - len(ok)
        if failed:
            logger.warning("%s n=%d %s: %d/%d replications failed", scenario, n, model, failed, reps)
        table = MetricsTable.aggregate([r.pop("metrics") for r in ok])
        report.cells.append(StudyCell(scenario, n, model, table, failed))
        report.records.extend(records)

        if progress:
            elapsed = time.time() - start_time
            eta_minutes = elapsed / i * (len(cells) - i) / 60
            print(f"Progress: {i}/{len(cells)} ({i / len(cells) * 100:.1f}%) | "
                  f"Time: {elapsed / 60:.1f}min | ETA: {eta_minutes:.1f}min | "
                  f"cell ({scenario}, n={n}, {model}) MSE(pi)x100={table.mse_pi_mean * 100:.3f}")
            sys.stdout.flush()
    return report
