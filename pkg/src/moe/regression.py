"""Dataset container and the weighted regression updates used by every CM-step."""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from .errors import EmptyComponentError, SingularDesignError, UsageError

CONDITION_LIMIT = 1e12
SIGMA2_FLOOR_SCALE = 1e-8
MIN_SIGMA2 = 1e-300


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Responses ``y``, expert design ``X`` (intercept first) and gating covariate ``t``."""

    y: np.ndarray
    X: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        y = _frozen(self.y).ravel()
        X = _frozen(self.X)
        t = _frozen(self.t).ravel()
        if X.ndim != 2:
            raise UsageError(f"X must be 2-D, got shape {X.shape}")
        n = y.shape[0]
        if X.shape[0] != n or t.shape[0] != n:
            raise UsageError(f"length mismatch: y={n}, X={X.shape[0]}, t={t.shape[0]}")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X)) and np.all(np.isfinite(t))):
            raise UsageError("Dataset entries must all be finite")
        if n == 0 or not np.all(X[:, 0] == 1.0):
            raise UsageError("first column of X must be identically 1")
        p = X.shape[1] - 1
        if n < 2 * (p + 2):
            raise UsageError(f"need n >= 2(p+2) = {2 * (p + 2)} observations, got {n}")
        y.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "t", t)

    @classmethod
    def from_columns(cls, y, x, t=None) -> "Dataset":
        """Build a Dataset from raw covariates, prepending the intercept column.

        ``t`` defaults to the first covariate.
        """
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        X = np.column_stack([np.ones(x.shape[0]), x])
        return cls(y=np.asarray(y, dtype=float), X=X, t=x[:, 0] if t is None else np.asarray(t, dtype=float))

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1] - 1

    @property
    def t_range(self) -> float:
        return float(self.t.max() - self.t.min())

    def sigma2_floor(self, scale: float = SIGMA2_FLOOR_SCALE) -> float:
        return sigma2_floor(self.y, scale)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(y=self.y[idx], X=self.X[idx], t=self.t[idx])

    def with_response(self, y) -> "Dataset":
        return Dataset(y=np.asarray(y, dtype=float), X=self.X, t=self.t)


def as_weight_vector(w, n: int) -> np.ndarray:
    """Validate a weight vector: length n, finite, non-negative, positive total."""
    w = np.asarray(w, dtype=float).ravel()
    if w.shape[0] != n:
        raise UsageError(f"weight vector has length {w.shape[0]}, expected {n}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise UsageError("weights must be finite and non-negative")
    if w.sum() <= 0:
        raise UsageError("weights must have a positive sum")
    return w


def weighted_least_squares(d: Dataset, w, component: Optional[int] = None) -> np.ndarray:
    """Minimise sum_i w_i (y_i - x_i'beta)^2 via QR of the sqrt-weighted design."""
    w = as_weight_vector(w, d.n)
    sw = np.sqrt(w)
    q, r = np.linalg.qr(d.X * sw[:, None])
    with np.errstate(divide="ignore", invalid="ignore"):
        condition = float(np.linalg.cond(r))
    if not np.isfinite(condition) or condition > CONDITION_LIMIT:
        raise SingularDesignError(component, condition)
    return solve_triangular(r, q.T @ (d.y * sw))


def ordinary_least_squares(d: Dataset) -> np.ndarray:
    return weighted_least_squares(d, np.ones(d.n))


def sigma2_floor(y, scale: float = SIGMA2_FLOOR_SCALE) -> float:
    """Default variance floor, ``scale * var(y)``."""
    return max(scale * float(np.var(np.asarray(y, dtype=float))), MIN_SIGMA2)


def weighted_sigma2(residuals, w, n_k: float, floor: Optional[float] = None, y=None, component: int = 0) -> float:
    """sum_i w_i r_i^2 / n_k, never below ``floor``.

    Without an explicit ``floor`` the response ``y`` is required and the floor is 1e-8 var(y).
    """
    if not n_k > 0:
        raise EmptyComponentError(component, n_k)
    if floor is None:
        if y is None:
            raise UsageError("weighted_sigma2 needs either floor or the response y")
        floor = sigma2_floor(y)
    r = np.asarray(residuals, dtype=float)
    w = np.asarray(w, dtype=float)
    return max(float(np.dot(w, r * r)) / n_k, floor)
