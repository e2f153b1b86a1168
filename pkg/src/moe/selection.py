"""Degrees of freedom and BIC for the six model kinds.

The kernel smoother's complexity enters through an effective degrees of
freedom, EDF = tau_K * |T| * (K(0) - 0.5 * int K^2) / h, counted once per
component.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

from scipy.integrate import quad
from scipy.stats import norm

from .errors import MixtureError, UsageError
from .kernel_gating import KernelSpec

QUAD_LIMIT = 10.0


@dataclass(frozen=True)
class DegreesOfFreedom:
    df1: float
    df2: float
    total: float

    @classmethod
    def of(cls, df1: float, df2: float = 0.0) -> "DegreesOfFreedom":
        if df1 < 0 or df2 < 0:
            raise UsageError(f"degrees of freedom must be non-negative, got df1={df1}, df2={df2}")
        return cls(float(df1), float(df2), float(df1 + df2))


def parametric_df(K: int, p: int, q: int, cfg) -> int:
    """Free parameters of the experts plus, for parametric gating, of the gates."""
    if K < 1 or p < 0 or q < 0:
        raise UsageError(f"need K >= 1, p >= 0, q >= 0; got K={K}, p={p}, q={q}")
    per_component = 3 if cfg.component_family == "contaminated" else 1
    df = per_component * K + K * (p + 1)
    if cfg.gating_kind == "constant" or (cfg.gating_kind == "logistic" and K == 1):
        df += K - 1
    elif cfg.gating_kind == "logistic":
        df += (K - 1) * (q + 1)
    return df


def _kernel_pieces(kernel: KernelSpec):
    """(K(0), int K^2) for the standard kernel."""
    if kernel.family != "gaussian":
        raise UsageError(f"no kernel constants for family {kernel.family!r}")
    k0 = kernel.kernel(0.0)
    k_sq, _ = quad(lambda u: norm.pdf(u) ** 2, -QUAD_LIMIT, QUAD_LIMIT)
    return float(k0), k_sq


def edf_numerator(kernel: KernelSpec) -> float:
    k0, k_sq = _kernel_pieces(kernel)
    return k0 - 0.5 * k_sq


@lru_cache(maxsize=None)
def _tau_gaussian() -> float:
    # K*K for the Gaussian kernel is the N(0, 2) density.
    conv = norm(scale=math.sqrt(2.0)).pdf
    denom, err = quad(lambda u: (norm.pdf(u) - 0.5 * conv(u)) ** 2, -QUAD_LIMIT, QUAD_LIMIT, epsabs=1e-13, epsrel=1e-12)
    if not math.isfinite(denom) or denom <= 0 or err > 1e-8:
        raise MixtureError(f"tau_K quadrature failed (value={denom}, abserr={err})")
    return edf_numerator(KernelSpec(1.0)) / denom


def tau_k(kernel: KernelSpec) -> float:
    """[K(0) - 0.5 int K^2] / int (K - 0.5 K*K)^2; about 2.5375 for the Gaussian kernel."""
    if kernel.family != "gaussian":
        raise UsageError(f"no kernel constants for family {kernel.family!r}")
    return _tau_gaussian()


def edf(kernel: KernelSpec, t_support_length: float) -> float:
    if t_support_length < 0:
        raise UsageError(f"support length must be >= 0, got {t_support_length}")
    return tau_k(kernel) * t_support_length * edf_numerator(kernel) / kernel.bandwidth


def bic(loglik: float, df: float, n: int) -> float:
    """-2 loglik + df log n; lower is better."""
    if n < 1:
        raise UsageError(f"n must be >= 1, got {n}")
    return -2.0 * loglik + df * math.log(n)


def degrees_of_freedom(cfg, p: int, q: int, t_support_length: float) -> DegreesOfFreedom:
    df1 = parametric_df(cfg.K, p, q, cfg)
    df2 = 0.0
    if cfg.gating_kind == "nonparametric" and cfg.K > 1:
        df2 = cfg.K * edf(cfg.kernel, t_support_length)
    return DegreesOfFreedom.of(df1, df2)
