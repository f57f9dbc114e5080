"""Topological charge correlations of singularities in isotropic Gaussian
random fields: exact two-point machinery, closed forms, and Monte Carlo."""

__version__ = "0.1.0"

from .kinds import CRITICAL, UMBILIC, VECTOR2, VECTOR3, SingularityKind, parse_kind
from .correlations import (
    CorrelationModel,
    DerivativeStack,
    DerivedCorrelations,
    correlations_at,
    custom_model,
    derived_correlations,
    eval_derivatives,
    gauss_model,
    model_by_name,
    ring_model,
)

__all__ = [
    "CRITICAL",
    "UMBILIC",
    "VECTOR2",
    "VECTOR3",
    "SingularityKind",
    "parse_kind",
    "CorrelationModel",
    "DerivativeStack",
    "DerivedCorrelations",
    "correlations_at",
    "custom_model",
    "derived_correlations",
    "eval_derivatives",
    "gauss_model",
    "model_by_name",
    "ring_model",
    "__version__",
]
