"""Catalog of hierarchical models, keyed by name."""

from __future__ import annotations

from .gaussian2 import Gaussian2Spec, make_gaussian2
from .hyperbolic import HyperbolicSpec, make_hyperbolic
from .lasso import LassoSpec, lasso_chain, make_lasso, sample_regression
from .mixture import (
    Component,
    MixtureSpec,
    direct_fisher,
    discrete_component,
    gaussian_component,
    make_mixture,
    mixture_conditional_fisher,
    mixture_latent_fisher,
)
from .studentt import StudentTSpec, make_studentt

MODELS = {
    "mixture": make_mixture,
    "gaussian2": make_gaussian2,
    "studentt": make_studentt,
    "lasso": make_lasso,
    "hyperbolic": make_hyperbolic,
}

DESCRIPTIONS = {
    "mixture": "finite mixture with known components; weights on the open simplex",
    "gaussian2": "y|w ~ N(w, 1/delta), w|phi ~ N(mu, 1/phi); unknown precision phi",
    "studentt": "Student-t degrees of freedom via y|w ~ N(0, 1/w), w ~ Ga(theta/2, theta/2)",
    "lasso": "Bayesian lasso rate theta via uniform scale mixture of Ga(2, theta) scales",
    "hyperbolic": "hyperbolic law via y|w ~ N(theta w, w), w ~ GIG(1, theta, 1)",
}


def get_model(name, **params):
    """Build a catalog model by name; unknown names raise ``KeyError``."""
    try:
        factory = MODELS[name]
    except KeyError:
        raise KeyError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None
    return factory(**params)


__all__ = [
    "MODELS",
    "DESCRIPTIONS",
    "get_model",
    "Component",
    "Gaussian2Spec",
    "HyperbolicSpec",
    "LassoSpec",
    "MixtureSpec",
    "StudentTSpec",
    "direct_fisher",
    "discrete_component",
    "gaussian_component",
    "lasso_chain",
    "make_gaussian2",
    "make_hyperbolic",
    "make_lasso",
    "make_mixture",
    "make_studentt",
    "mixture_conditional_fisher",
    "mixture_latent_fisher",
    "sample_regression",
]
