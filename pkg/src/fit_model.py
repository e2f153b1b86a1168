"""
Fit one mixture-of-experts model to a CSV file and export the results.

Writes into --out-dir:
  <model>_report.json          parameters, loglik, df, BIC, convergence, clusters
  <model>_curves.csv           u, pi_1(u) .. pi_K(u) on a grid over t
  <model>_lines.csv            fitted component lines for plotting
  <model>_classification.csv   (classify) cluster, outlier flag, z and v rows
"""

import os
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

# Configure UTF-8 encoding for Windows
if sys.platform == "win32":
    import codecs
    sys.stdout = codecs.getwriter("utf-8")(sys.stdout.detach())

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from moe.clustering import ClusterReport, classify
from moe.ecm import MODEL_KINDS, FitResult, ModelConfig, fit, mixing_proportions
from moe.kernel_gating import GridSpec, NonparamGating, cross_validate_bandwidth, default_bandwidth
from moe.logistic_gating import LogisticGating
from moe.regression import Dataset
from moe.selection import bic
from utils.ingest_csv import ingest_csv
from utils.reports import SCHEMA_VERSION, write_all
from utils.run_config import RunConfig, script_main

LINE_POINTS = 100


def resolve_bandwidth(d: Dataset, cfg: RunConfig, model_cfg: ModelConfig):
    """(h, cv summary or None): --h wins, then --h-grid cross-validation, then the reference rule."""
    if cfg.h is not None:
        return cfg.h, None
    if cfg.h_grid:
        cv = cross_validate_bandwidth(d, cfg.k, cfg.h_grid, cfg.folds, model_cfg, cfg.n_jobs)
        summary = {
            "h_grid": list(cv.h_grid),
            "folds": cfg.folds,
            "mean_heldout_loglik": list(cv.mean_scores),
            "selected": cv.selected,
        }
        return cv.selected, summary
    return default_bandwidth(d.t), None


def fit_from_config(cfg: RunConfig):
    d = ingest_csv(cfg.data, cfg.y_col, cfg.x_cols, cfg.t_col)
    common = dict(n_restarts=cfg.restarts, seed=cfg.seed, max_iter=cfg.max_iter, tol=cfg.tol, n_jobs=cfg.n_jobs)
    h, cv = None, None
    if MODEL_KINDS[cfg.model][1] == "nonparametric":
        template = ModelConfig.for_model(cfg.model, cfg.k, bandwidth=1.0, **common)
        h, cv = resolve_bandwidth(d, cfg, template)
    model_cfg = ModelConfig.for_model(cfg.model, cfg.k, bandwidth=h, **common)
    print(f"Fitting {cfg.model} with K={cfg.k} on {d.n} rows from {cfg.data}")
    if h is not None:
        print(f"Bandwidth: {h:.6g}")
    return d, fit(d, model_cfg), h, cv


def gating_summary(result: FitResult) -> dict:
    g = result.gating
    if isinstance(g, LogisticGating):
        return {"kind": "logistic", "gamma": g.gamma.tolist()}
    if isinstance(g, NonparamGating):
        return {"kind": "nonparametric", "bandwidth": g.kernel.bandwidth, "grid_points": g.grid.m}
    return {"kind": "constant", "weights": list(g.weights)}


def build_fit_report(result: FitResult, clusters: ClusterReport, d: Dataset, cfg: RunConfig,
                     h: Optional[float], cv: Optional[dict]) -> dict:
    p = result.params
    components = []
    for k in range(p.K):
        comp = {"beta": list(p.beta[k]), "sigma2": float(p.sigma2[k])}
        if p.alpha is not None:
            comp.update(
                alpha=float(p.alpha[k]),
                eta=float(p.eta[k]),
                alpha_at_bound=bool(result.alpha_at_bound[k]),
                eta_at_bound=bool(result.eta_at_bound[k]),
            )
        comp["mean_pi"] = float(result.fitted_pi[:, k].mean())
        comp["n_assigned"] = int(np.sum(clusters.labels == k))
        components.append(comp)
    return {
        "schema_version": SCHEMA_VERSION,
        "model": cfg.model,
        "K": cfg.k,
        "n": d.n,
        "p": d.p,
        "data": cfg.data,
        "seed": cfg.seed,
        "bandwidth": h,
        "bandwidth_cv": cv,
        "loglik": result.loglik,
        "df": {"df1": result.df.df1, "df2": result.df.df2, "total": result.df.total},
        "bic": result.bic,
        "converged": result.converged,
        "n_iter": result.n_iter,
        "n_restarts": cfg.restarts,
        "n_failed_starts": result.n_failed_starts,
        "best_start": result.attempt,
        "components": components,
        "gating": gating_summary(result),
        "clusters": [int(v) + 1 for v in clusters.labels],
        "outliers": [int(i) + 1 for i in np.flatnonzero(clusters.outlier)],
        "outlier_threshold": clusters.threshold,
        "loglik_trace": list(result.loglik_trace),
    }


def bic_from_report(report: dict) -> float:
    """Recompute BIC from the stored (loglik, df, n)."""
    return bic(report["loglik"], report["df"]["total"], report["n"])


def curve_rows(result: FitResult, d: Dataset) -> List[list]:
    g = result.gating
    points = g.grid.points if isinstance(g, NonparamGating) else GridSpec.uniform(d.t).points
    pi = mixing_proportions(g, points)
    return [[float(u)] + [float(v) for v in row] for u, row in zip(points, pi)]


def line_rows(result: FitResult, d: Dataset) -> List[list]:
    """Component lines over the covariate range (p = 1) or fitted values per observation."""
    beta = result.params.beta
    if d.p == 1:
        x = np.linspace(d.X[:, 1].min(), d.X[:, 1].max(), LINE_POINTS)
        fitted = beta[:, 0][None, :] + np.outer(x, beta[:, 1])
        return [[float(u)] + [float(v) for v in row] for u, row in zip(x, fitted)]
    fitted = d.X @ beta.T
    return [[i + 1] + [float(v) for v in row] for i, row in enumerate(fitted)]


def _out(cfg: RunConfig, suffix: str) -> str:
    return str(Path(cfg.out_dir) / f"{cfg.model}_{suffix}")


def cmd_fit(cfg: RunConfig) -> int:
    d, result, h, cv = fit_from_config(cfg)
    clusters = classify(result, cfg.threshold)
    report = build_fit_report(result, clusters, d, cfg, h, cv)
    K = result.params.K
    pi_header = ["u"] + [f"pi_{k + 1}" for k in range(K)]
    line_header = (["x"] if d.p == 1 else ["row"]) + [f"fitted_{k + 1}" for k in range(K)]
    outputs = [
        ("json", _out(cfg, "report.json"), report),
        ("csv", _out(cfg, "curves.csv"), pi_header, curve_rows(result, d)),
        ("csv", _out(cfg, "lines.csv"), line_header, line_rows(result, d)),
    ]
    write_all(outputs)
    print(f"✓ loglik={result.loglik:.4f}  df={result.df.total:.3f}  BIC={result.bic:.4f}  "
          f"converged={result.converged} ({result.n_iter} iterations)")
    print(f"✓ {clusters.n_outliers} outlier(s) flagged; reports written to {cfg.out_dir}")
    return 0


def classification_rows(clusters: ClusterReport) -> List[list]:
    rows = []
    for i in range(clusters.labels.shape[0]):
        rows.append(
            [i + 1, int(clusters.labels[i]) + 1, int(clusters.outlier[i])]
            + [float(v) for v in clusters.zhat[i]]
            + [float(v) for v in clusters.vhat[i]]
        )
    return rows


def cmd_classify(cfg: RunConfig) -> int:
    d, result, h, cv = fit_from_config(cfg)
    clusters = classify(result, cfg.threshold)
    K = result.params.K
    header = ["row", "cluster", "outlier"] + [f"z_{k + 1}" for k in range(K)] + [f"v_{k + 1}" for k in range(K)]
    write_all([("csv", _out(cfg, "classification.csv"), header, classification_rows(clusters))])
    counts = ", ".join(f"cluster {k + 1}: {c}" for k, c in enumerate(clusters.counts()))
    print(f"✓ {counts}; {clusters.n_outliers} outlier(s)")
    return 0


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    if not argv or argv[0] not in ("fit", "classify"):
        print("Usage: fit_model.py {fit,classify} [options]", file=sys.stderr)
        return 2
    command, rest = argv[0], argv[1:]
    command_fn = cmd_fit if command == "fit" else cmd_classify
    return script_main(command, command_fn, f"{command} a mixture-of-experts model", rest)


if __name__ == "__main__":
    sys.exit(main())
