"""Multinomial-logistic gating and its damped Newton-Raphson update.

Component K is the reference class: its coefficient vector is fixed at zero,
so ``gamma`` stores K-1 rows of length q+1.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.special import logsumexp

from .errors import GatingDivergenceError, UsageError

logger = logging.getLogger(__name__)

COEF_CAP = 30.0
INNER_TOL = 1e-8
INNER_MAX_ITER = 100
MAX_HALVINGS = 30


@dataclass(frozen=True, eq=False)
class LogisticGating:
    gamma: np.ndarray

    def __post_init__(self):
        gamma = np.array(self.gamma, dtype=float)
        if gamma.ndim != 2 or gamma.shape[0] < 1:
            raise UsageError(f"gamma must be (K-1) x (q+1) with K >= 2, got shape {gamma.shape}")
        if not np.all(np.isfinite(gamma)):
            raise UsageError("gamma entries must be finite")
        gamma.setflags(write=False)
        object.__setattr__(self, "gamma", gamma)

    @classmethod
    def zeros(cls, K: int, n_coef: int = 2) -> "LogisticGating":
        return cls(np.zeros((K - 1, n_coef)))

    @property
    def K(self) -> int:
        return self.gamma.shape[0] + 1

    @property
    def q(self) -> int:
        return self.gamma.shape[1] - 1


def gating_design(t) -> np.ndarray:
    """Gating design matrix [1, t] for a scalar covariate."""
    t = np.asarray(t, dtype=float).ravel()
    return np.column_stack([np.ones_like(t), t])


def _check_design(T: np.ndarray, n_coef: int) -> np.ndarray:
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.shape[1] != n_coef:
        raise UsageError(f"gating design has shape {T.shape}, expected (n, {n_coef})")
    return T


def log_softmax_gating(T, g: LogisticGating) -> np.ndarray:
    T = _check_design(T, g.gamma.shape[1])
    logits = np.column_stack([T @ g.gamma.T, np.zeros(T.shape[0])])
    return logits - logsumexp(logits, axis=1, keepdims=True)


def softmax_gating(T, g: LogisticGating) -> np.ndarray:
    """n x K matrix of gating probabilities."""
    return np.exp(log_softmax_gating(T, g))


def gating_objective(T, Z, gamma) -> float:
    """Q(gamma) = sum_i sum_k z_ik log pi_k(t_i | gamma)."""
    log_pi = log_softmax_gating(T, LogisticGating(gamma))
    with np.errstate(invalid="ignore"):
        return float(np.sum(np.where(Z > 0, Z * log_pi, 0.0)))


def gating_gradient(T, Z, gamma) -> np.ndarray:
    """Gradient of Q, flattened row-major over (K-1) x (q+1)."""
    T = np.asarray(T, dtype=float)
    pi = softmax_gating(T, LogisticGating(gamma))
    s = Z.sum(axis=1)
    resid = Z[:, :-1] - s[:, None] * pi[:, :-1]
    return (resid.T @ T).ravel()


def gating_hessian(T, Z, gamma) -> np.ndarray:
    T = np.asarray(T, dtype=float)
    pi = softmax_gating(T, LogisticGating(gamma))
    s = Z.sum(axis=1)
    K1, c = pi.shape[1] - 1, T.shape[1]
    H = np.empty((K1 * c, K1 * c))
    for k in range(K1):
        for l in range(K1):
            coef = s * pi[:, k] * ((1.0 if k == l else 0.0) - pi[:, l])
            H[k * c:(k + 1) * c, l * c:(l + 1) * c] = -(T * coef[:, None]).T @ T
    return H


def _ascent_direction(grad: np.ndarray, hess: np.ndarray) -> np.ndarray:
    """Newton direction solving (-H) d = g, ridged when -H is not safely positive definite."""
    A = -hess
    if np.linalg.cond(A) < 1e12:
        d = np.linalg.solve(A, grad)
        if np.all(np.isfinite(d)) and grad @ d >= 0:
            return d
    ridge = 1e-8 * max(1.0, float(np.trace(A)) / A.shape[0])
    for _ in range(20):
        try:
            d = np.linalg.solve(A + ridge * np.eye(A.shape[0]), grad)
        except np.linalg.LinAlgError:
            d = None
        if d is not None and np.all(np.isfinite(d)) and grad @ d >= 0:
            return d
        ridge *= 10.0
    return grad


def fit_gating(
    T,
    Z,
    init: LogisticGating,
    max_iter: int = INNER_MAX_ITER,
    tol: float = INNER_TOL,
    max_halvings: int = MAX_HALVINGS,
    coef_cap: float = COEF_CAP,
    trace: Optional[List[float]] = None,
) -> LogisticGating:
    """Maximise Q(gamma) by step-halved Newton-Raphson; Q never decreases.

    ``trace``, when given, receives Q at the start and after every accepted step.
    """
    T = _check_design(T, init.gamma.shape[1])
    Z = np.asarray(Z, dtype=float)
    if Z.shape != (T.shape[0], init.K):
        raise UsageError(f"responsibilities have shape {Z.shape}, expected {(T.shape[0], init.K)}")

    gamma = np.clip(init.gamma, -coef_cap, coef_cap)
    q_old = gating_objective(T, Z, gamma)
    if not np.isfinite(q_old):
        raise GatingDivergenceError(f"gating objective is {q_old} at the initial coefficients")
    if trace is not None:
        trace.append(q_old)

    for _ in range(max_iter):
        direction = _ascent_direction(gating_gradient(T, Z, gamma), gating_hessian(T, Z, gamma))
        direction = direction.reshape(gamma.shape)
        step, accepted, saw_finite = 1.0, False, False
        for _ in range(max_halvings + 1):
            candidate = np.clip(gamma + step * direction, -coef_cap, coef_cap)
            q_new = gating_objective(T, Z, candidate)
            saw_finite = saw_finite or np.isfinite(q_new)
            if np.isfinite(q_new) and q_new >= q_old:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            if not saw_finite:
                raise GatingDivergenceError("gating objective stayed non-finite through every step halving")
            break
        change = float(np.max(np.abs(candidate - gamma)))
        gamma, q_old = candidate, q_new
        if trace is not None:
            trace.append(q_old)
        if change < tol:
            break
    else:
        logger.debug("gating Newton loop hit %d iterations", max_iter)
    return LogisticGating(gamma)
