"""
Robust mixtures of linear experts with contaminated-Gaussian components.
"""

from .clustering import ClusterReport, classify
from .ecm import MODEL_KINDS, ExpertParams, FitResult, ModelConfig, fit
from .kernel_gating import GridSpec, KernelSpec, default_bandwidth, select_bandwidth_cv
from .regression import Dataset

__all__ = [
    "MODEL_KINDS",
    "ClusterReport",
    "Dataset",
    "ExpertParams",
    "FitResult",
    "GridSpec",
    "KernelSpec",
    "ModelConfig",
    "classify",
    "default_bandwidth",
    "fit",
    "select_bandwidth_cv",
]
