"""Model abstraction and the Fisher decomposition identities."""

from .types import (
    ConditionalSpec,
    DecompositionReport,
    Domain,
    FisherMatrix,
    HierarchicalModel,
    ParamPoint,
    add_fisher,
    combine_methods,
    empty_given,
    zero_fisher,
)
from .decomposition import (
    complete_fisher,
    decompose_multilevel,
    decompose_two_level,
    expected_conditional_latent_fisher,
    expected_level1_fisher,
    latent_fisher,
    marginal_fisher,
    subtract_with_repair,
)

__all__ = [
    "ConditionalSpec",
    "DecompositionReport",
    "Domain",
    "FisherMatrix",
    "HierarchicalModel",
    "ParamPoint",
    "add_fisher",
    "combine_methods",
    "empty_given",
    "zero_fisher",
    "complete_fisher",
    "decompose_multilevel",
    "decompose_two_level",
    "expected_conditional_latent_fisher",
    "expected_level1_fisher",
    "latent_fisher",
    "marginal_fisher",
    "subtract_with_repair",
]
