"""Local-linear kernel estimates of covariate-dependent mixing proportions.

pi_k(t) = E[Z_k | T = t] is smoothed from the E-step responsibilities on a
grid of local points, then carried to the observations by linear
interpolation. Raw local-linear values are neither bounded nor summing to
one, so every row is clipped to [EPS, 1 - EPS] and renormalised.
"""

import logging
import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from joblib import Parallel, delayed
from scipy.stats import norm

from .errors import BoundaryDegeneracyWarning, FitFailureError, MixtureError, SingularDesignError, UsageError
from .regression import Dataset

logger = logging.getLogger(__name__)

EPS = 1e-6
DEGENERACY_RATIO = 1e-12
MAX_GRID_POINTS = 100
KERNEL_FAMILIES = ("gaussian",)


@dataclass(frozen=True)
class KernelSpec:
    bandwidth: float
    family: str = "gaussian"

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise UsageError(f"unknown kernel family {self.family!r}; valid: {', '.join(KERNEL_FAMILIES)}")
        if not (math.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise UsageError(f"bandwidth must be a positive number, got {self.bandwidth!r}")

    def kernel(self, u):
        return norm.pdf(u)

    def scaled(self, d):
        """K_h(d) = K(d/h)/h."""
        return self.kernel(np.asarray(d, dtype=float) / self.bandwidth) / self.bandwidth


@dataclass(frozen=True, eq=False)
class GridSpec:
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).ravel()
        if pts.shape[0] < 2:
            raise UsageError("a grid needs at least two local points")
        if not np.all(np.isfinite(pts)) or np.any(np.diff(pts) <= 0):
            raise UsageError("grid points must be finite and strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, t, m: Optional[int] = None) -> "GridSpec":
        """m equally spaced points over [min t, max t]; m defaults to min(n, 100)."""
        t = np.asarray(t, dtype=float)
        m = min(t.shape[0], MAX_GRID_POINTS) if m is None else m
        if t.max() <= t.min():
            raise UsageError("the gating covariate is constant; no grid can be built")
        return cls(np.linspace(t.min(), t.max(), m))

    @classmethod
    def from_observed(cls, t) -> "GridSpec":
        return cls(np.unique(np.asarray(t, dtype=float)))

    @property
    def m(self) -> int:
        return self.points.shape[0]

    def covers(self, t) -> bool:
        t = np.asarray(t, dtype=float)
        return self.points[0] <= t.min() and self.points[-1] >= t.max()


def normalize_rows(P, eps: float = EPS) -> np.ndarray:
    """Clip to [eps, 1 - eps] and renormalise rows; rows already valid are left untouched."""
    P = np.array(P, dtype=float)
    for _ in range(50):
        bad = (np.abs(P.sum(axis=1) - 1.0) > 1e-12) | np.any(P < eps, axis=1) | np.any(P > 1.0 - eps, axis=1)
        if not bad.any():
            break
        rows = np.clip(P[bad], eps, 1.0 - eps)
        P[bad] = rows / rows.sum(axis=1, keepdims=True)
    return P


def interpolate_rows(points: np.ndarray, values: np.ndarray, t) -> np.ndarray:
    """Linear interpolation of grid rows at t; exact lookup when t hits a grid point."""
    t = np.asarray(t, dtype=float).ravel()
    out = np.column_stack([np.interp(t, points, values[:, k]) for k in range(values.shape[1])])
    pos = np.clip(np.searchsorted(points, t), 0, points.shape[0] - 1)
    hit = points[pos] == t
    out[hit] = values[pos[hit]]
    return out


@dataclass(frozen=True, eq=False)
class NonparamGating:
    grid: GridSpec
    values: np.ndarray
    at_data: np.ndarray
    kernel: KernelSpec

    @property
    def K(self) -> int:
        return self.values.shape[1]

    def evaluate(self, t) -> np.ndarray:
        """Mixing proportions at arbitrary covariate values (edges held constant outside the grid)."""
        return normalize_rows(interpolate_rows(self.grid.points, self.values, t))

    @classmethod
    def uniform(cls, t, K: int, grid: GridSpec, kernel: KernelSpec) -> "NonparamGating":
        t = np.asarray(t, dtype=float)
        return cls(grid, np.full((grid.m, K), 1.0 / K), np.full((t.shape[0], K), 1.0 / K), kernel)


def _local_linear(t, Z, points, k: KernelSpec):
    """Local-linear intercepts at every point for every column of Z.

    Returns (values m x K, degenerate mask m). Uses the centred form of the
    2x2 weighted normal equations, algebraically equal to
    [sum (s2 - s1 d_i) K z_i] / (s2 s0 - s1^2).
    """
    t = np.asarray(t, dtype=float)
    Z = np.asarray(Z, dtype=float)
    points = np.atleast_1d(np.asarray(points, dtype=float))
    D = t[None, :] - points[:, None]
    W = k.scaled(D)
    s0 = W.sum(axis=1)
    if np.any(s0 <= 0):
        u = points[np.argmax(s0 <= 0)]
        raise SingularDesignError(None, math.inf, where=f"local point u={u:.6g} (no kernel mass)")
    dbar = (W * D).sum(axis=1) / s0
    Dc = D - dbar[:, None]
    sxx = (W * Dc * Dc).sum(axis=1)
    zbar = (W @ Z) / s0[:, None]
    degenerate = sxx < DEGENERACY_RATIO * s0
    slope = np.where(degenerate[:, None], 0.0, ((W * Dc) @ Z) / np.where(degenerate, 1.0, sxx)[:, None])
    values = zbar - slope * dbar[:, None]
    if degenerate.any():
        warnings.warn(
            f"local-linear fit degenerate at {int(degenerate.sum())} point(s); used local-constant estimate",
            BoundaryDegeneracyWarning,
            stacklevel=3,
        )
    return values, degenerate


def local_linear_estimate(t, zcol, u: float, k: KernelSpec) -> float:
    """Local-linear estimate of E[z | t = u] (the intercept of the local fit)."""
    values, _ = _local_linear(t, np.asarray(zcol, dtype=float)[:, None], [u], k)
    return float(values[0, 0])


def estimate_curves(t, Z, grid: GridSpec, k: KernelSpec) -> NonparamGating:
    t = np.asarray(t, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[0] != t.shape[0]:
        raise UsageError(f"responsibilities have shape {Z.shape}, expected ({t.shape[0]}, K)")
    if np.any(np.abs(Z.sum(axis=1) - 1.0) > 1e-6):
        raise UsageError("responsibility rows must sum to 1")
    if not grid.covers(t):
        raise UsageError("grid does not cover the observed range of t")
    raw, _ = _local_linear(t, Z, grid.points, k)
    values = normalize_rows(raw)
    at_data = normalize_rows(interpolate_rows(grid.points, values, t))
    return NonparamGating(grid, values, at_data, k)


def default_bandwidth(t) -> float:
    """Normal-reference bandwidth 1.06 * sd(t) * n^(-1/5)."""
    t = np.asarray(t, dtype=float)
    return 1.06 * float(np.std(t, ddof=1)) * t.shape[0] ** (-0.2)


DEFAULT_H_MULTIPLIERS = (0.25, 0.5, 0.75, 1.0, 1.5, 2.0)


def default_h_grid(t) -> np.ndarray:
    """Candidate bandwidths around the reference rule."""
    return default_bandwidth(t) * np.asarray(DEFAULT_H_MULTIPLIERS)


@dataclass(frozen=True, eq=False)
class BandwidthCVResult:
    h_grid: np.ndarray
    scores: np.ndarray
    mean_scores: np.ndarray
    selected: float


def cv_folds(t, folds: int) -> np.ndarray:
    """Fold id per observation: ``folds`` contiguous blocks of the t-ordered data, sizes differing by at most one."""
    order = np.argsort(np.asarray(t, dtype=float), kind="stable")
    ids = np.empty(order.shape[0], dtype=int)
    n = order.shape[0]
    ids[order] = np.arange(n) * folds // n
    return ids


def _cv_cell(d: Dataset, fold_ids: np.ndarray, fold: int, cfg) -> float:
    from .ecm import fit, mixing_proportions, predictive_loglik

    train, test = d.subset(fold_ids != fold), d.subset(fold_ids == fold)
    try:
        result = fit(train, cfg)
    except MixtureError as exc:
        logger.warning("CV h=%.4g fold %d failed: %s", cfg.kernel.bandwidth, fold, exc)
        return -math.inf
    return predictive_loglik(test, result.params, mixing_proportions(result.gating, test.t))


def cross_validate_bandwidth(d: Dataset, K: int, h_grid, folds: int = 5, fit_config=None, n_jobs: int = 1) -> BandwidthCVResult:
    """Held-out log-likelihood of the semi-parametric fit for every candidate bandwidth."""
    from .ecm import ModelConfig

    h_grid = np.asarray(h_grid, dtype=float).ravel()
    if h_grid.size == 0 or np.any(h_grid <= 0) or np.any(np.diff(h_grid) <= 0):
        raise UsageError("h-grid must be positive and strictly ascending")
    if folds < 2:
        raise UsageError(f"folds must be >= 2, got {folds}")
    if folds > d.n:
        raise UsageError(f"folds ({folds}) cannot exceed the number of observations ({d.n})")
    if fit_config is None:
        fit_config = ModelConfig(K=K, component_family="contaminated", gating_kind="nonparametric",
                                 kernel=KernelSpec(float(h_grid[0])))
    if fit_config.gating_kind != "nonparametric":
        raise UsageError("bandwidth selection needs a nonparametric-gating model")

    fold_ids = cv_folds(d.t, folds)
    cells = [(i, f) for i in range(h_grid.size) for f in range(folds)]
    configs = [replace(fit_config, K=K, kernel=KernelSpec(float(h)), n_jobs=1) for h in h_grid]
    flat = Parallel(n_jobs=n_jobs)(delayed(_cv_cell)(d, fold_ids, f, configs[i]) for i, f in cells)
    scores = np.asarray(flat, dtype=float).reshape(h_grid.size, folds)
    mean_scores = scores.mean(axis=1)
    if not np.any(np.isfinite(mean_scores)):
        raise FitFailureError("no bandwidth produced a finite held-out log-likelihood")
    best = np.flatnonzero(mean_scores == np.max(mean_scores))
    selected = float(h_grid[best[-1]])
    for h, score in zip(h_grid, mean_scores):
        logger.info("CV h=%.4g mean held-out loglik=%.6g", h, score)
    return BandwidthCVResult(h_grid, scores, mean_scores, selected)


def select_bandwidth_cv(d: Dataset, K: int, h_grid, folds: int = 5, fit_config=None, n_jobs: int = 1) -> float:
    """Bandwidth maximising mean held-out log-likelihood; ties go to the larger h."""
    return cross_validate_bandwidth(d, K, h_grid, folds, fit_config, n_jobs).selected
