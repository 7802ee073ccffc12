"""Numerical verification lab for weak-to-strong generalization bounds."""

from .bregman import (
    BregmanGeometry,
    DomainError,
    Mahalanobis,
    NegativeEntropy,
    SampleSet,
    SquaredNorm,
    clamp_simplex,
    mean_minimizer,
)
from .losses import CompositeLossConfig, ProbVector

__all__ = [
    "BregmanGeometry",
    "SquaredNorm",
    "Mahalanobis",
    "NegativeEntropy",
    "SampleSet",
    "mean_minimizer",
    "clamp_simplex",
    "DomainError",
    "ProbVector",
    "CompositeLossConfig",
    "__version__",
]

__version__ = "0.1.0"
