"""ECM engine behind all six model kinds.

One cycle is an E-step (responsibilities Z, non-outlier posteriors V), a
first conditional maximisation over (alpha, beta, sigma2, gating) with eta
held fixed, then a closed-form update of eta. The Gaussian family is the
same loop with V frozen at one and no alpha/eta.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from scipy.special import logsumexp

from .distributions import contaminated_log_terms, normal_logpdf
from .errors import (
    EmptyComponentError,
    FitFailureError,
    GatingDivergenceError,
    InvalidParameterError,
    PosteriorUnderflowWarning,
    SingularDesignError,
    UsageError,
)
from .kernel_gating import GridSpec, KernelSpec, NonparamGating, estimate_curves
from .logistic_gating import LogisticGating, fit_gating, gating_design, softmax_gating
from .regression import Dataset, ordinary_least_squares, weighted_least_squares, weighted_sigma2
from .selection import DegreesOfFreedom, bic, degrees_of_freedom

logger = logging.getLogger(__name__)

COMPONENT_FAMILIES = ("gaussian", "contaminated")
GATING_KINDS = ("constant", "logistic", "nonparametric")
MODEL_KINDS = {
    "gmlr": ("gaussian", "constant"),
    "cgmlr": ("contaminated", "constant"),
    "gmoe": ("gaussian", "logistic"),
    "cgmoe": ("contaminated", "logistic"),
    "sgmoe": ("gaussian", "nonparametric"),
    "scgmoe": ("contaminated", "nonparametric"),
}
EMPTY_FRACTION = 1e-6
DIRICHLET_CONCENTRATION = 0.5
GATING_COEFS = 2
ROW_SUM_TOL = 1e-10


@dataclass(frozen=True)
class ModelConfig:
    K: int
    component_family: str = "contaminated"
    gating_kind: str = "constant"
    kernel: Optional[KernelSpec] = None
    max_iter: int = 500
    tol: float = 1e-8
    n_restarts: int = 10
    seed: int = 0
    eta_bounds: Tuple[float, float] = (1.0 + 1e-6, 1e6)
    alpha_bounds: Tuple[float, float] = (0.01, 0.99)
    sigma2_floor_scale: float = 1e-8
    grid_size: Optional[int] = None
    init_alpha: float = 0.95
    init_eta: float = 20.0
    n_jobs: int = 1

    def __post_init__(self):
        if self.K < 1:
            raise UsageError(f"K must be >= 1, got {self.K}")
        if self.component_family not in COMPONENT_FAMILIES:
            raise UsageError(f"unknown component family {self.component_family!r}; valid: {', '.join(COMPONENT_FAMILIES)}")
        if self.gating_kind not in GATING_KINDS:
            raise UsageError(f"unknown gating kind {self.gating_kind!r}; valid: {', '.join(GATING_KINDS)}")
        if (self.kernel is not None) != (self.gating_kind == "nonparametric"):
            raise UsageError("a kernel is required for nonparametric gating and only there")
        if self.max_iter < 1 or self.n_restarts < 1 or self.tol <= 0:
            raise UsageError("max_iter and n_restarts must be >= 1 and tol > 0")
        lo, hi = self.eta_bounds
        if not 1.0 < lo < hi:
            raise UsageError(f"eta bounds must satisfy 1 < lower < upper, got {self.eta_bounds}")
        lo, hi = self.alpha_bounds
        if not 0.0 < lo < hi < 1.0:
            raise UsageError(f"alpha bounds must satisfy 0 < lower < upper < 1, got {self.alpha_bounds}")
        if self.seed < 0:
            raise UsageError(f"seed must be non-negative, got {self.seed}")

    @classmethod
    def for_model(cls, name: str, K: int, bandwidth: Optional[float] = None, **kwargs) -> "ModelConfig":
        """Config for one of the CLI model names (gmlr, cgmlr, gmoe, cgmoe, sgmoe, scgmoe)."""
        if name not in MODEL_KINDS:
            raise UsageError(f"unknown model {name!r}; valid: {', '.join(MODEL_KINDS)}")
        family, gating = MODEL_KINDS[name]
        kernel = None
        if gating == "nonparametric":
            if bandwidth is None:
                raise UsageError(f"model {name} needs a bandwidth")
            kernel = KernelSpec(float(bandwidth))
        return cls(K=K, component_family=family, gating_kind=gating, kernel=kernel, **kwargs)

    @property
    def model_name(self) -> str:
        return next(name for name, kind in MODEL_KINDS.items() if kind == (self.component_family, self.gating_kind))

    @property
    def contaminated(self) -> bool:
        return self.component_family == "contaminated"

    @property
    def effective_gating(self) -> str:
        if self.gating_kind == "logistic" and self.K == 1:
            return "constant"
        return self.gating_kind


@dataclass(frozen=True, eq=False)
class ConstantGating:
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-8:
            raise InvalidParameterError(f"constant gating weights must be positive and sum to 1, got {w}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def K(self) -> int:
        return self.weights.shape[0]


Gating = Union[ConstantGating, LogisticGating, NonparamGating]


@dataclass(frozen=True, eq=False)
class ExpertParams:
    beta: np.ndarray
    sigma2: np.ndarray
    alpha: Optional[np.ndarray] = None
    eta: Optional[np.ndarray] = None

    def __post_init__(self):
        beta = np.atleast_2d(np.array(self.beta, dtype=float))
        sigma2 = np.array(self.sigma2, dtype=float).ravel()
        K = beta.shape[0]
        if sigma2.shape != (K,) or np.any(~np.isfinite(sigma2)) or np.any(sigma2 <= 0):
            raise InvalidParameterError(f"sigma2 must be K={K} positive values, got {sigma2}")
        if not np.all(np.isfinite(beta)):
            raise InvalidParameterError("beta must be finite")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "sigma2", sigma2)
        if (self.alpha is None) != (self.eta is None):
            raise InvalidParameterError("alpha and eta are given together or not at all")
        if self.alpha is not None:
            alpha = np.array(self.alpha, dtype=float).ravel()
            eta = np.array(self.eta, dtype=float).ravel()
            if alpha.shape != (K,) or np.any(alpha <= 0) or np.any(alpha >= 1):
                raise InvalidParameterError(f"alpha must be K={K} values in (0, 1), got {alpha}")
            if eta.shape != (K,) or np.any(~np.isfinite(eta)) or np.any(eta <= 1):
                raise InvalidParameterError(f"eta must be K={K} values > 1, got {eta}")
            object.__setattr__(self, "alpha", alpha)
            object.__setattr__(self, "eta", eta)

    @property
    def K(self) -> int:
        return self.beta.shape[0]

    def residuals(self, d: Dataset) -> np.ndarray:
        """n x K matrix y_i - x_i' beta_k."""
        return d.y[:, None] - d.X @ self.beta.T

    def permuted(self, perm) -> "ExpertParams":
        perm = list(perm)
        if self.alpha is None:
            return ExpertParams(self.beta[perm], self.sigma2[perm])
        return ExpertParams(self.beta[perm], self.sigma2[perm], self.alpha[perm], self.eta[perm])


@dataclass(frozen=True, eq=False)
class Posteriors:
    Z: np.ndarray
    V: np.ndarray
    underflow_rows: Tuple[int, ...] = ()


@dataclass(frozen=True, eq=False)
class FitResult:
    config: ModelConfig
    params: ExpertParams
    gating: Gating
    posteriors: Posteriors
    loglik_trace: List[float]
    converged: bool
    n_iter: int
    df: DegreesOfFreedom
    bic: float
    fitted_pi: np.ndarray
    n: int
    attempt: int = 0
    n_failed_starts: int = 0
    alpha_at_bound: Optional[np.ndarray] = None
    eta_at_bound: Optional[np.ndarray] = None
    failures: List[str] = field(default_factory=list)

    @property
    def loglik(self) -> float:
        return self.loglik_trace[-1]


def mixing_proportions(gating: Gating, t) -> np.ndarray:
    """n x K mixing proportions at covariate values t."""
    t = np.asarray(t, dtype=float).ravel()
    if isinstance(gating, ConstantGating):
        return np.tile(gating.weights, (t.shape[0], 1))
    if isinstance(gating, LogisticGating):
        return softmax_gating(gating_design(t), gating)
    if isinstance(gating, NonparamGating):
        return gating.evaluate(t)
    raise UsageError(f"unsupported gating object {type(gating).__name__}")


def _training_proportions(d: Dataset, gating: Gating) -> np.ndarray:
    if isinstance(gating, NonparamGating):
        if gating.at_data.shape[0] != d.n:
            raise UsageError(f"gating was estimated on {gating.at_data.shape[0]} points, dataset has {d.n}")
        return gating.at_data
    return mixing_proportions(gating, d.t)


def component_log_densities(d: Dataset, params: ExpertParams) -> Tuple[np.ndarray, np.ndarray]:
    """(log typical-part numerator, log component density), both n x K."""
    resid = params.residuals(d)
    if params.alpha is None:
        log_f = normal_logpdf(resid, 0.0, params.sigma2)
        return log_f, log_f
    return contaminated_log_terms(resid, params.sigma2, params.alpha, params.eta)


def _log_joint(d: Dataset, params: ExpertParams, pi: np.ndarray):
    log_typical, log_f = component_log_densities(d, params)
    with np.errstate(divide="ignore"):
        log_pi = np.log(pi)
    return log_typical, log_f, log_pi + log_f


def predictive_loglik(d: Dataset, params: ExpertParams, pi: np.ndarray) -> float:
    """sum_i log sum_k pi_ik f_k(y_i | x_i) for given mixing proportions."""
    _, _, joint = _log_joint(d, params, np.asarray(pi, dtype=float))
    return float(np.sum(logsumexp(joint, axis=1)))


def observed_loglik(d: Dataset, params: ExpertParams, gating: Gating) -> float:
    return predictive_loglik(d, params, _training_proportions(d, gating))


def e_step(d: Dataset, params: ExpertParams, gating: Gating) -> Posteriors:
    log_typical, log_f, joint = _log_joint(d, params, _training_proportions(d, gating))
    log_norm = logsumexp(joint, axis=1, keepdims=True)
    underflow = ~np.isfinite(log_norm.ravel())
    with np.errstate(invalid="ignore"):
        Z = np.exp(joint - log_norm)
    if underflow.any():
        rows = tuple(int(i) for i in np.flatnonzero(underflow))
        Z[underflow] = 1.0 / params.K
        warnings.warn(f"all component densities underflowed for {len(rows)} observation(s)", PosteriorUnderflowWarning, stacklevel=2)
        logger.warning("uniform responsibilities assigned to rows %s", rows[:10])
    else:
        rows = ()
    if params.alpha is None:
        V = np.ones_like(Z)
    else:
        with np.errstate(invalid="ignore"):
            V = np.where(np.isfinite(log_f), np.exp(log_typical - log_f), 0.0)
        V = np.clip(V, 0.0, 1.0)
    return Posteriors(Z, V, rows)


def _grid_for(d: Dataset, cfg: ModelConfig) -> GridSpec:
    return GridSpec.uniform(d.t, cfg.grid_size)


def _update_gating(d: Dataset, Z: np.ndarray, n_k: np.ndarray, cfg: ModelConfig, gating_prev: Optional[Gating]) -> Gating:
    kind = cfg.effective_gating
    if kind == "constant":
        return ConstantGating(n_k / n_k.sum())
    if kind == "logistic":
        init = gating_prev if isinstance(gating_prev, LogisticGating) else LogisticGating.zeros(cfg.K, GATING_COEFS)
        return fit_gating(gating_design(d.t), Z, init)
    grid = gating_prev.grid if isinstance(gating_prev, NonparamGating) else _grid_for(d, cfg)
    return estimate_curves(d.t, Z, grid, cfg.kernel)


def cm_step1(d: Dataset, post: Posteriors, eta_prev, cfg: ModelConfig, gating_prev: Optional[Gating] = None) -> Tuple[ExpertParams, Gating]:
    """Update (alpha, beta, sigma2) and the gating with eta held at ``eta_prev``.

    The returned ExpertParams carries ``eta_prev`` unchanged for the
    contaminated family.
    """
    Z, V = post.Z, post.V
    n_k = Z.sum(axis=0)
    limit = cfg.K * EMPTY_FRACTION * d.n
    for k in range(cfg.K):
        if n_k[k] < limit:
            raise EmptyComponentError(k, float(n_k[k]))

    if cfg.contaminated:
        eta_prev = np.asarray(eta_prev, dtype=float).ravel()
        alpha = np.clip((Z * V).sum(axis=0) / n_k, *cfg.alpha_bounds)
        W = Z * (V + (1.0 - V) / eta_prev)
    else:
        alpha = None
        W = Z

    floor = d.sigma2_floor(cfg.sigma2_floor_scale)
    beta = np.empty((cfg.K, d.X.shape[1]))
    sigma2 = np.empty(cfg.K)
    for k in range(cfg.K):
        beta[k] = weighted_least_squares(d, W[:, k], component=k)
        resid = d.y - d.X @ beta[k]
        sigma2[k] = weighted_sigma2(resid, W[:, k], n_k[k], floor=floor, component=k)

    gating = _update_gating(d, Z, n_k, cfg, gating_prev)
    params = ExpertParams(beta, sigma2, alpha, eta_prev if cfg.contaminated else None)
    return params, gating


def cm_step2_eta(post: Posteriors, residuals, sigma2, bounds=(1.0 + 1e-6, 1e6)) -> np.ndarray:
    """Closed-form maximiser eta = b/a of -a/2 log eta - b/(2 eta), clamped to bounds."""
    sigma2 = np.asarray(sigma2, dtype=float)
    if np.any(sigma2 <= 0):
        raise InvalidParameterError("sigma2 must be > 0")
    mass = post.Z * (1.0 - post.V)
    a = mass.sum(axis=0)
    b = (mass * np.asarray(residuals) ** 2).sum(axis=0) / sigma2
    lo, hi = bounds
    with np.errstate(divide="ignore", invalid="ignore"):
        eta = np.where(a > 0, b / np.where(a > 0, a, 1.0), lo)
    return np.clip(eta, lo, hi)


def _initial_gating(d: Dataset, cfg: ModelConfig) -> Gating:
    kind = cfg.effective_gating
    if kind == "constant":
        return ConstantGating(np.full(cfg.K, 1.0 / cfg.K))
    if kind == "logistic":
        return LogisticGating.zeros(cfg.K, GATING_COEFS)
    return NonparamGating.uniform(d.t, cfg.K, _grid_for(d, cfg), cfg.kernel)


def initialize(d: Dataset, cfg: ModelConfig, attempt: int = 0) -> Tuple[ExpertParams, Gating]:
    """Starting values; attempt 0 is deterministic, later attempts are seeded random."""
    contaminated = cfg.contaminated
    if attempt == 0:
        resid = d.y - d.X @ ordinary_least_squares(d)
        groups = np.array_split(np.argsort(resid, kind="stable"), cfg.K)
        beta = np.empty((cfg.K, d.X.shape[1]))
        pooled = 0.0
        for k, idx in enumerate(groups):
            sub = d.X[idx]
            if idx.shape[0] < sub.shape[1] or np.linalg.matrix_rank(sub) < sub.shape[1]:
                raise SingularDesignError(k, math.inf)
            beta[k] = np.linalg.lstsq(sub, d.y[idx], rcond=None)[0]
            pooled += float(np.sum((d.y[idx] - sub @ beta[k]) ** 2))
        sigma2 = np.full(cfg.K, max(pooled / d.n, d.sigma2_floor(cfg.sigma2_floor_scale)))
        if contaminated:
            params = ExpertParams(beta, sigma2, np.full(cfg.K, cfg.init_alpha), np.full(cfg.K, cfg.init_eta))
        else:
            params = ExpertParams(beta, sigma2)
        return params, _initial_gating(d, cfg)

    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, attempt]))
    Z = rng.dirichlet(np.full(cfg.K, DIRICHLET_CONCENTRATION), size=d.n)
    V = np.full_like(Z, cfg.init_alpha if contaminated else 1.0)
    eta = np.full(cfg.K, cfg.init_eta)
    return cm_step1(d, Posteriors(Z, V), eta, cfg, _initial_gating(d, cfg))


def _boundary_flags(values: Optional[np.ndarray], bounds: Tuple[float, float]) -> Optional[np.ndarray]:
    if values is None:
        return None
    lo, hi = bounds
    return np.isclose(values, lo, rtol=1e-9, atol=0.0) | np.isclose(values, hi, rtol=1e-9, atol=0.0)


def _converged(ll: float, prev: float, tol: float) -> bool:
    return abs(ll - prev) <= tol * max(abs(prev), np.finfo(float).tiny)


def run_ecm(d: Dataset, cfg: ModelConfig, params: ExpertParams, gating: Gating, attempt: int = 0) -> FitResult:
    """Iterate ECM cycles from the given starting values."""
    trace = [observed_loglik(d, params, gating)]
    if not math.isfinite(trace[0]):
        raise FitFailureError(f"initial log-likelihood is {trace[0]}")
    converged = False
    n_iter = 0
    for n_iter in range(1, cfg.max_iter + 1):
        post = e_step(d, params, gating)
        assert np.all(np.abs(post.Z.sum(axis=1) - 1.0) <= ROW_SUM_TOL), "responsibility rows must sum to one"
        eta_prev = params.eta if cfg.contaminated else None
        params, gating = cm_step1(d, post, eta_prev, cfg, gating)
        if cfg.contaminated:
            eta = cm_step2_eta(post, params.residuals(d), params.sigma2, cfg.eta_bounds)
            params = ExpertParams(params.beta, params.sigma2, params.alpha, eta)
        ll = observed_loglik(d, params, gating)
        if not math.isfinite(ll):
            raise FitFailureError(f"log-likelihood became {ll} at iteration {n_iter}")
        trace.append(ll)
        logger.debug("attempt %d iter %d loglik %.10g", attempt, n_iter, ll)
        if _converged(ll, trace[-2], cfg.tol):
            converged = True
            break

    post = e_step(d, params, gating)
    assert np.all(np.abs(post.Z.sum(axis=1) - 1.0) <= ROW_SUM_TOL), "responsibility rows must sum to one"
    df = degrees_of_freedom(cfg, d.p, 1, d.t_range)
    return FitResult(
        config=cfg,
        params=params,
        gating=gating,
        posteriors=post,
        loglik_trace=trace,
        converged=converged,
        n_iter=n_iter,
        df=df,
        bic=bic(trace[-1], df.total, d.n),
        fitted_pi=_training_proportions(d, gating),
        n=d.n,
        attempt=attempt,
        alpha_at_bound=_boundary_flags(params.alpha, cfg.alpha_bounds),
        eta_at_bound=_boundary_flags(params.eta, cfg.eta_bounds),
    )


def _run_attempt(d: Dataset, cfg: ModelConfig, attempt: int):
    try:
        params, gating = initialize(d, cfg, attempt)
        return run_ecm(d, cfg, params, gating, attempt)
    except (SingularDesignError, EmptyComponentError, GatingDivergenceError, FitFailureError, InvalidParameterError) as exc:
        return f"start {attempt}: {exc}"


def fit(d: Dataset, cfg: ModelConfig) -> FitResult:
    """Run ``cfg.n_restarts`` starts and keep the one with the highest final log-likelihood."""
    outcomes = Parallel(n_jobs=cfg.n_jobs)(delayed(_run_attempt)(d, cfg, a) for a in range(cfg.n_restarts))
    failures = [o for o in outcomes if isinstance(o, str)]
    fits = [o for o in outcomes if isinstance(o, FitResult)]
    for msg in failures:
        logger.info("%s failed: %s", cfg.model_name, msg)
    if not fits:
        raise FitFailureError(f"all {cfg.n_restarts} starts of {cfg.model_name} failed", failures)

    best = max(fits, key=lambda r: (r.loglik, -r.attempt))
    logger.info(
        "%s K=%d: best start %d, loglik %.6f, BIC %.4f (%d/%d starts failed)",
        cfg.model_name, cfg.K, best.attempt, best.loglik, best.bic, len(failures), cfg.n_restarts,
    )
    if not best.converged:
        logger.warning("%s did not converge within %d iterations", cfg.model_name, cfg.max_iter)
    return replace(best, n_failed_starts=len(failures), failures=failures)

