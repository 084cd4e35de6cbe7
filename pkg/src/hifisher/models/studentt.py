"""Student-t with unknown degrees of freedom as a Gaussian scale mixture.

``y | w ~ N(0, 1/w)`` and ``w | theta ~ Ga(theta/2, theta/2)``; given ``y``
the precision is ``Ga((theta+1)/2, (theta+y^2)/2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core.types import ConditionalSpec, Domain, HierarchicalModel
from ..specialfn import trigamma
from ._common import LOG_2PI, col, gamma_logpdf, normal_logpdf


@dataclass(frozen=True)
class StudentTSpec:
    """Degrees of freedom live on ``(0, inf)``; no fixed parameters."""


def latent_fisher(theta):
    return 0.25 * trigamma(theta / 2.0) - 0.5 / theta


def conditional_fisher(theta, y):
    s = theta + np.asarray(y, dtype=float) ** 2
    return 0.25 * trigamma((theta + 1.0) / 2.0) + (theta + 1.0) / (2.0 * s**2) - 1.0 / s


def expected_conditional_fisher(theta):
    return 0.25 * trigamma((theta + 1.0) / 2.0) + (theta + 2.0) / (2.0 * theta * (theta + 3.0)) - 1.0 / (theta + 1.0)


def marginal_fisher(theta):
    return 0.25 * (trigamma(theta / 2.0) - trigamma((theta + 1.0) / 2.0)) - (theta + 5.0) / (
        2.0 * theta * (theta + 1.0) * (theta + 3.0)
    )


def marginal_logpdf(y, theta):
    y = np.asarray(y, dtype=float)
    return (
        math.lgamma((theta + 1.0) / 2.0)
        - math.lgamma(theta / 2.0)
        - 0.5 * (math.log(theta) + LOG_2PI - math.log(2.0))
        - 0.5 * (theta + 1.0) * np.log1p(y * y / theta)
    )


def make_studentt() -> HierarchicalModel:
    def l1_logpdf(y, w, t):
        return normal_logpdf(col(y), 0.0, 1.0 / col(w))

    def l1_sample(rng, w, t):
        return (rng.standard_normal(len(w)) / np.sqrt(col(w)))[:, None]

    def l2_logpdf(w, given, t):
        return gamma_logpdf(col(w), t[0] / 2.0, t[0] / 2.0)

    def l2_sample(rng, given, t):
        return rng.gamma(t[0] / 2.0, 2.0 / t[0], size=(len(given), 1))

    def l2_fisher(given, t):
        return np.full((len(given), 1, 1), latent_fisher(t[0]))

    def cc_logpdf(w, y, t):
        return gamma_logpdf(col(w), (t[0] + 1.0) / 2.0, (t[0] + col(y) ** 2) / 2.0)

    def cc_sample(rng, y, t):
        rate = (t[0] + col(y) ** 2) / 2.0
        return (rng.gamma((t[0] + 1.0) / 2.0, size=len(y)) / rate)[:, None]

    def cc_fisher(y, t):
        return conditional_fisher(t[0], col(y)).reshape(-1, 1, 1)

    return HierarchicalModel(
        name="studentt",
        domain=Domain.positive(1),
        theta_dim=1,
        latent_dim=1,
        obs_dim=1,
        level1=ConditionalSpec("y|w", 1, l1_logpdf, l1_sample, depends_on_theta=False),
        level2=ConditionalSpec("w|theta", 1, l2_logpdf, l2_sample, fisher=l2_fisher, kind="positive"),
        complete_conditional=ConditionalSpec("w|theta,y", 1, cc_logpdf, cc_sample, fisher=cc_fisher, kind="positive"),
        marginal=lambda y, t: marginal_logpdf(col(y), t[0]),
        expected_conditional_fisher=lambda t: np.array([[expected_conditional_fisher(t[0])]]),
        reference_marginal_fisher=lambda t: np.array([[marginal_fisher(t[0])]]),
        check_thetas=(2.0, 5.0),
    )
