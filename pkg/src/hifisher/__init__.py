"""Fisher information and Jeffreys priors for hierarchical latent-variable models."""

from .core import (
    ConditionalSpec,
    DecompositionReport,
    Domain,
    FisherMatrix,
    HierarchicalModel,
    ParamPoint,
    complete_fisher,
    decompose_multilevel,
    decompose_two_level,
    expected_conditional_latent_fisher,
    marginal_fisher,
)
from .estimators import EstimatorConfig, McEstimate

__version__ = "0.1.0"

__all__ = [
    "ConditionalSpec",
    "DecompositionReport",
    "Domain",
    "EstimatorConfig",
    "FisherMatrix",
    "HierarchicalModel",
    "McEstimate",
    "ParamPoint",
    "complete_fisher",
    "decompose_multilevel",
    "decompose_two_level",
    "expected_conditional_latent_fisher",
    "marginal_fisher",
]
