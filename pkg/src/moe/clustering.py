"""Two-stage classification: MAP component, then outlier flag within it."""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import UsageError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ClusterReport:
    labels: np.ndarray
    outlier: np.ndarray
    zhat: np.ndarray
    vhat: np.ndarray
    threshold: float

    @property
    def n_outliers(self) -> int:
        return int(self.outlier.sum())

    def counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.zhat.shape[1])


def classify_posteriors(Z, V, contaminated: bool, threshold: float = 0.5) -> ClusterReport:
    Z = np.asarray(Z, dtype=float)
    V = np.asarray(V, dtype=float)
    if Z.shape != V.shape or Z.ndim != 2:
        raise UsageError(f"posterior shapes differ or are not 2-D: Z={Z.shape}, V={V.shape}")
    if not 0.0 < threshold < 1.0:
        raise UsageError(f"threshold must lie in (0, 1), got {threshold}")
    # argmax returns the first maximum, so ties go to the lowest index
    labels = np.argmax(Z, axis=1)
    if contaminated:
        outlier = V[np.arange(Z.shape[0]), labels] < threshold
    else:
        outlier = np.zeros(Z.shape[0], dtype=bool)
    return ClusterReport(labels, outlier, Z, V, threshold)


def classify(fit, threshold: float = 0.5) -> ClusterReport:
    """Cluster labels (0-based) and outlier flags for a fitted model."""
    if not fit.converged:
        logger.warning("classifying a fit that did not converge (%d iterations)", fit.n_iter)
    post = fit.posteriors
    return classify_posteriors(post.Z, post.V, fit.config.contaminated, threshold)
