"""Gaussian and contaminated-Gaussian densities, evaluated in log space.

The contaminated Gaussian mixes a typical normal part (weight ``alpha``,
variance ``sigma2``) with an inflated part (weight ``1 - alpha``, variance
``eta * sigma2``) sharing the same mean. Fitted ``eta`` can reach 1e5, so all
mixing happens on the log scale.
"""

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from .errors import InvalidParameterError, UsageError

LOG_2PI = math.log(2.0 * math.pi)


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise InvalidParameterError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class GaussianParams:
    mu: float
    sigma2: float

    def __post_init__(self):
        _require_finite("mu", self.mu)
        _require_finite("sigma2", self.sigma2)
        if self.sigma2 <= 0:
            raise InvalidParameterError(f"sigma2 must be > 0, got {self.sigma2}")


@dataclass(frozen=True)
class ContaminatedGaussianParams:
    mu: float
    sigma2: float
    alpha: float
    eta: float

    def __post_init__(self):
        for name in ("mu", "sigma2", "alpha", "eta"):
            _require_finite(name, getattr(self, name))
        if self.sigma2 <= 0:
            raise InvalidParameterError(f"sigma2 must be > 0, got {self.sigma2}")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidParameterError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.eta <= 1.0:
            raise InvalidParameterError(f"eta must be > 1, got {self.eta}")

    @property
    def typical(self) -> GaussianParams:
        return GaussianParams(self.mu, self.sigma2)

    @property
    def inflated(self) -> GaussianParams:
        return GaussianParams(self.mu, self.eta * self.sigma2)


def normal_logpdf(y, mean, sigma2):
    """Elementwise log N(y | mean, sigma2); arrays broadcast."""
    y = np.asarray(y, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    resid = y - mean
    return -0.5 * (LOG_2PI + np.log(sigma2)) - 0.5 * resid * resid / sigma2


def contaminated_log_terms(resid, sigma2, alpha, eta) -> Tuple[np.ndarray, np.ndarray]:
    """Return (log alpha*N(r|0,s2), log CN(r)) for residual arrays.

    ``resid`` is n x K, the parameter vectors have length K. The first term
    is the numerator of the non-outlier posterior.
    """
    log_typical = np.log(alpha) + normal_logpdf(resid, 0.0, sigma2)
    log_inflated = np.log1p(-np.asarray(alpha)) + normal_logpdf(resid, 0.0, np.asarray(eta) * sigma2)
    return log_typical, np.logaddexp(log_typical, log_inflated)


def gaussian_logpdf(y: float, p: GaussianParams) -> float:
    _require_finite("y", y)
    return float(normal_logpdf(y, p.mu, p.sigma2))


def gaussian_pdf(y: float, p: GaussianParams) -> float:
    return math.exp(gaussian_logpdf(y, p))


def contaminated_gaussian_logpdf(y: float, p: ContaminatedGaussianParams) -> float:
    _require_finite("y", y)
    _, log_cn = contaminated_log_terms(y - p.mu, p.sigma2, p.alpha, p.eta)
    return float(log_cn)


def contaminated_gaussian_pdf(y: float, p: ContaminatedGaussianParams) -> float:
    return math.exp(contaminated_gaussian_logpdf(y, p))


def log_sum_exp(values: Sequence[float]) -> float:
    """Stable log(sum(exp(values))); -inf when every value is -inf."""
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise UsageError("log_sum_exp needs at least one value")
    if np.all(np.isneginf(arr)):
        return -math.inf
    return float(logsumexp(arr))
