"""Symmetric-scale hyperbolic model as a Gaussian / GIG mixture.

``y | w, theta ~ N(theta w, w)`` and ``w | theta ~ GIG(1, theta, 1)``, the
hyperbolic law with ``mu = 0``, ``delta = 1``, ``beta = theta`` and
``alpha = sqrt(2) theta``.  Both levels involve ``theta``; given ``y`` the
mixing variable is ``GIG(1/2, sqrt(2) theta, sqrt(y^2 + 1))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core.types import ConditionalSpec, Domain, HierarchicalModel
from ..specialfn import GigParams, bessel_ratio_r, gig_logpdf, gig_sample, log_bessel_k, s_curvature
from ._common import col, normal_logpdf

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class HyperbolicSpec:
    """``mu = 0`` and ``delta = 1`` are fixed; only ``theta`` is free."""

    mu: float = 0.0
    delta: float = 1.0


def latent_fisher(theta):
    return s_curvature(1.0, theta)


def expected_level1_fisher(theta):
    return bessel_ratio_r(1.0, theta) / theta


def conditional_fisher(theta, y):
    c = 2.0 * (np.asarray(y, dtype=float) ** 2 + 1.0)
    return c * s_curvature(0.5, theta * np.sqrt(c))


def complete_upper_bound(theta):
    """I_{y,w}(theta) = S_1(theta) + R_1(theta)/theta."""
    return latent_fisher(theta) + expected_level1_fisher(theta)


def marginal_logpdf(y, theta):
    y = np.asarray(y, dtype=float)
    return -math.log(2.0 * SQRT2) - log_bessel_k(1.0, theta) - SQRT2 * theta * np.sqrt(1.0 + y * y) + theta * y


def make_hyperbolic() -> HierarchicalModel:
    def l1_logpdf(y, w, t):
        w = col(w)
        return normal_logpdf(col(y), t[0] * w, w)

    def l1_sample(rng, w, t):
        w = col(w)
        return (t[0] * w + np.sqrt(w) * rng.standard_normal(len(w)))[:, None]

    def l1_fisher(w, t):
        return col(w).reshape(-1, 1, 1).copy()

    def l2_logpdf(w, given, t):
        return gig_logpdf(col(w), GigParams(1.0, t[0], 1.0))

    def l2_sample(rng, given, t):
        return np.asarray(gig_sample(GigParams(1.0, t[0], 1.0), rng, size=len(given))).reshape(-1, 1)

    def l2_fisher(given, t):
        return np.full((len(given), 1, 1), latent_fisher(t[0]))

    def cc_params(y, t):
        return GigParams(0.5, SQRT2 * t[0], np.sqrt(col(y) ** 2 + 1.0))

    def cc_logpdf(w, y, t):
        return gig_logpdf(col(w), cc_params(y, t))

    def cc_sample(rng, y, t):
        return np.asarray(gig_sample(cc_params(y, t), rng)).reshape(-1, 1)

    def cc_fisher(y, t):
        return conditional_fisher(t[0], col(y)).reshape(-1, 1, 1)

    return HierarchicalModel(
        name="hyperbolic",
        domain=Domain.positive(1),
        theta_dim=1,
        latent_dim=1,
        obs_dim=1,
        level1=ConditionalSpec("y|w,theta", 1, l1_logpdf, l1_sample, fisher=l1_fisher),
        level2=ConditionalSpec("w|theta", 1, l2_logpdf, l2_sample, fisher=l2_fisher, kind="positive"),
        complete_conditional=ConditionalSpec("w|theta,y", 1, cc_logpdf, cc_sample, fisher=cc_fisher, kind="positive"),
        marginal=lambda y, t: marginal_logpdf(col(y), t[0]),
        expected_level1_fisher=lambda t: np.array([[expected_level1_fisher(t[0])]]),
        check_thetas=(1.0, 2.0),
    )
