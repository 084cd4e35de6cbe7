"""Two-level Gaussian random-effect model.

``y | w ~ N(w, 1/delta)`` with ``delta`` known and ``w | phi ~ N(mu, 1/phi)``.
The observation level does not involve ``phi``, so the marginal information
is ``I_w(phi) - E_y[I_w(phi | y)]``.  With ``parametrization="variance"`` the
unknown is ``tau = 1/phi``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.types import ConditionalSpec, Domain, HierarchicalModel
from ._common import col, normal_logpdf


@dataclass(frozen=True)
class Gaussian2Spec:
    mu: float = 0.0
    delta: float = 1.0
    parametrization: str = "precision"

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.parametrization not in ("precision", "variance"):
            raise ValueError("parametrization must be 'precision' or 'variance'")


def gaussian_curvature(a_prime, big_a, big_a_prime):
    """Fisher information of ``N(a(t), A(t))`` in ``t``: ``(A'/A)^2/2 + a'^2/A``."""
    return 0.5 * (big_a_prime / big_a) ** 2 + a_prime**2 / big_a


def precision_conditional_fisher(phi, y, mu=0.0, delta=1.0):
    """I_w(phi | y) for the posterior ``N((phi*mu + delta*y)/(phi+delta), 1/(phi+delta))``."""
    s = phi + delta
    return gaussian_curvature(delta * (mu - np.asarray(y, dtype=float)) / s**2, 1.0 / s, -1.0 / s**2)


def closed_form_marginal_fisher(phi, delta=1.0):
    """I_y(phi) from ``y ~ N(mu, 1/delta + 1/phi)``."""
    return delta**2 / (2.0 * phi**2 * (phi + delta) ** 2)


def subtraction_form(phi):
    """``(1/phi^2 - (phi+2)/(phi (phi+1)^2)) / 2`` for ``delta = 1``."""
    return 0.5 * (1.0 / phi**2 - (phi + 2.0) / (phi * (phi + 1.0) ** 2))


def make_gaussian2(mu=0.0, delta=1.0, parametrization="precision") -> HierarchicalModel:
    spec = Gaussian2Spec(float(mu), float(delta), parametrization)
    mu, delta = spec.mu, spec.delta
    variance = spec.parametrization == "variance"

    def prec(t):
        return 1.0 / t[0] if variance else t[0]

    def jac2(t):
        # (dphi/dt)^2 converts precision information to the working coordinate
        return 1.0 / t[0] ** 4 if variance else 1.0

    def l1_logpdf(y, w, t):
        return normal_logpdf(col(y), col(w), 1.0 / delta)

    def l1_sample(rng, w, t):
        return col(w)[:, None] + rng.standard_normal((len(w), 1)) / np.sqrt(delta)

    def l2_logpdf(w, given, t):
        return normal_logpdf(col(w), mu, 1.0 / prec(t))

    def l2_sample(rng, given, t):
        return mu + rng.standard_normal((len(given), 1)) / np.sqrt(prec(t))

    def l2_fisher(given, t):
        return np.full((len(given), 1, 1), 0.5 / t[0] ** 2)

    def post(y, t):
        phi = prec(t)
        return (phi * mu + delta * col(y)) / (phi + delta), 1.0 / (phi + delta)

    def cc_logpdf(w, y, t):
        m, v = post(y, t)
        return normal_logpdf(col(w), m, v)

    def cc_sample(rng, y, t):
        m, v = post(y, t)
        return (m + np.sqrt(v) * rng.standard_normal(len(y)))[:, None]

    def cc_fisher(y, t):
        return (precision_conditional_fisher(prec(t), col(y), mu, delta) * jac2(t)).reshape(-1, 1, 1)

    def expected_cc(t):
        phi = prec(t)
        return np.array([[(phi + 2 * delta) / (2 * phi * (phi + delta) ** 2) * jac2(t)]])

    def reference(t):
        return np.array([[closed_form_marginal_fisher(prec(t), delta) * jac2(t)]])

    def marginal(y, t):
        return normal_logpdf(col(y), mu, 1.0 / delta + 1.0 / prec(t))

    return HierarchicalModel(
        name="gaussian2",
        domain=Domain.positive(1),
        theta_dim=1,
        latent_dim=1,
        obs_dim=1,
        level1=ConditionalSpec("y|w", 1, l1_logpdf, l1_sample, depends_on_theta=False),
        level2=ConditionalSpec("w|phi", 1, l2_logpdf, l2_sample, fisher=l2_fisher),
        complete_conditional=ConditionalSpec("w|phi,y", 1, cc_logpdf, cc_sample, fisher=cc_fisher),
        marginal=marginal,
        expected_conditional_fisher=expected_cc,
        reference_marginal_fisher=reference,
        check_thetas=(1.0, 2.0),
        params={"mu": mu, "delta": delta, "parametrization": spec.parametrization},
    )
