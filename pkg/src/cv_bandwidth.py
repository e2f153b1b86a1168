"""
Choose the kernel bandwidth of a semi-parametric model by K-fold cross-validation.
"""

import os
import sys
from pathlib import Path

if sys.platform == "win32":
    import codecs
    sys.stdout = codecs.getwriter("utf-8")(sys.stdout.detach())

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from moe.ecm import MODEL_KINDS, ModelConfig
from moe.errors import UsageError
from moe.kernel_gating import cross_validate_bandwidth, default_h_grid
from utils.ingest_csv import ingest_csv
from utils.reports import SCHEMA_VERSION, write_json
from utils.run_config import RunConfig, script_main


def cmd_cv_bandwidth(cfg: RunConfig) -> int:
    if MODEL_KINDS[cfg.model][1] != "nonparametric":
        raise UsageError(f"cv-bandwidth needs a semi-parametric model (sgmoe or scgmoe), got {cfg.model}")
    d = ingest_csv(cfg.data, cfg.y_col, cfg.x_cols, cfg.t_col)
    h_grid = cfg.h_grid if cfg.h_grid else list(default_h_grid(d.t))
    template = ModelConfig.for_model(
        cfg.model, cfg.k, bandwidth=h_grid[0], n_restarts=cfg.restarts, seed=cfg.seed,
        max_iter=cfg.max_iter, tol=cfg.tol,
    )
    print(f"Cross-validating {len(h_grid)} bandwidth(s) with {cfg.folds} folds on {d.n} rows")
    result = cross_validate_bandwidth(d, cfg.k, h_grid, cfg.folds, template, cfg.n_jobs)

    print("-" * 60)
    print(f"{'h':>14}  {'mean held-out loglik':>22}")
    for h, score in zip(result.h_grid, result.mean_scores):
        marker = "  <- selected" if h == result.selected else ""
        print(f"{h:>14.6g}  {score:>22.6f}{marker}")
    print("-" * 60)

    payload = {
        "schema_version": SCHEMA_VERSION,
        "model": cfg.model,
        "K": cfg.k,
        "n": d.n,
        "folds": cfg.folds,
        "seed": cfg.seed,
        "h_grid": list(result.h_grid),
        "mean_heldout_loglik": list(result.mean_scores),
        "fold_heldout_loglik": result.scores.tolist(),
        "selected": result.selected,
    }
    out = Path(cfg.out_dir) / f"{cfg.model}_cv_bandwidth.json"
    write_json(str(out), payload)
    print(f"✓ Selected h = {result.selected:.6g}; written to {out}")
    return 0


def main(argv=None) -> int:
    return script_main("cv-bandwidth", cmd_cv_bandwidth, "Cross-validate the kernel bandwidth", argv)


if __name__ == "__main__":
    sys.exit(main())
