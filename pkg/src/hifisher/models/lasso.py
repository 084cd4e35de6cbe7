"""Bayesian lasso written as a uniform scale mixture.

Per coefficient ``w1_j | w2_j ~ Unif(-sigma w2_j, sigma w2_j)`` and
``w2_j | theta ~ Ga(2, theta)``, which makes ``w1_j`` Laplace with rate
``theta / sigma``.  The two-level model observes the coefficients ``w1`` and
treats the scales ``w2`` as latent; given ``w1`` each scale is
``|w1_j|/sigma + Exp(theta)``.  :func:`lasso_chain` adds a Gaussian
regression level on top for the multilevel recursion and for simulation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core.types import ConditionalSpec, Domain, HierarchicalModel


@dataclass(frozen=True)
class LassoSpec:
    p: int = 1
    sigma: float = 1.0
    design_matrix: Optional[np.ndarray] = None

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise ValueError("p must be a positive integer")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.design_matrix is not None:
            x = np.asarray(self.design_matrix, dtype=float)
            if x.ndim != 2 or x.shape[1] != self.p:
                raise ValueError(f"design matrix must have p={self.p} columns")


def _uniform_scale_logpdf(w1, w2, sigma):
    inside = np.all(np.abs(w1) <= sigma * w2, axis=1) & np.all(w2 > 0, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = -np.sum(np.log(2.0 * sigma * w2), axis=1)
    return np.where(inside, val, -np.inf)


def _scale_spec(p):
    def logpdf(w2, given, t):
        th = t[0]
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.sum(2.0 * np.log(th) + np.log(w2) - th * w2, axis=1)
        return np.where(np.all(w2 > 0, axis=1), val, -np.inf)

    def sample(rng, given, t):
        return rng.gamma(2.0, 1.0 / t[0], size=(len(given), p))

    def fisher(given, t):
        return np.full((len(given), 1, 1), 2.0 * p / t[0] ** 2)

    return ConditionalSpec("w2|theta", p, logpdf, sample, fisher=fisher, kind="positive")


def _coef_spec(p, sigma):
    def logpdf(w1, w2, t):
        return _uniform_scale_logpdf(w1, w2[:, -p:], sigma)

    def sample(rng, w2, t):
        s = sigma * w2[:, -p:]
        return rng.uniform(-s, s)

    return ConditionalSpec("w1|w2", p, logpdf, sample, depends_on_theta=False)


def make_lasso(p=1, sigma=1.0) -> HierarchicalModel:
    spec = LassoSpec(p, float(sigma))
    p, sigma = int(spec.p), spec.sigma

    def cc_logpdf(w2, w1, t):
        th = t[0]
        excess = w2 - np.abs(w1) / sigma
        val = np.sum(np.log(th) - th * excess, axis=1)
        return np.where(np.all(excess >= 0, axis=1), val, -np.inf)

    def cc_sample(rng, w1, t):
        return np.abs(w1) / sigma + rng.exponential(1.0 / t[0], size=w1.shape)

    def cc_fisher(w1, t):
        return np.full((len(w1), 1, 1), p / t[0] ** 2)

    def marginal(w1, t):
        rate = t[0] / sigma
        return np.sum(np.log(rate / 2.0) - rate * np.abs(w1), axis=1)

    return HierarchicalModel(
        name="lasso",
        domain=Domain.positive(1),
        theta_dim=1,
        latent_dim=p,
        obs_dim=p,
        level1=_coef_spec(p, sigma),
        level2=_scale_spec(p),
        complete_conditional=ConditionalSpec("w2|theta,w1", p, cc_logpdf, cc_sample, fisher=cc_fisher, kind="positive"),
        marginal=marginal,
        expected_conditional_fisher=lambda t: np.array([[p / t[0] ** 2]]),
        reference_marginal_fisher=lambda t: np.array([[p / t[0] ** 2]]),
        check_thetas=(1.0, 2.0),
        params={"p": p, "sigma": sigma},
        oracle_exempt="the latent chain (w1, w2) has 2p coordinates; the lasso is checked by its exact algebra "
        "(theta^2 I_y = p) instead",
    )


def lasso_chain(p=1, sigma=1.0, design_matrix=None, noise_sd=1.0):
    """Three levels ``[w2 | theta, w1 | w2, y | w1]`` for :func:`decompose_multilevel`.

    ``y = X w1 + noise`` with ``X`` the identity when no design is given.
    """
    spec = LassoSpec(p, float(sigma), design_matrix)
    p, sigma = int(spec.p), spec.sigma
    x = np.eye(p) if spec.design_matrix is None else np.asarray(spec.design_matrix, dtype=float)
    n_obs = x.shape[0]

    def y_logpdf(y, given, t):
        mean = given[:, -p:] @ x.T
        return -0.5 * np.sum(np.log(2 * np.pi * noise_sd**2) + ((y - mean) / noise_sd) ** 2, axis=1)

    def y_sample(rng, given, t):
        return given[:, -p:] @ x.T + noise_sd * rng.standard_normal((len(given), n_obs))

    return [
        _scale_spec(p),
        _coef_spec(p, sigma),
        ConditionalSpec("y|w1", n_obs, y_logpdf, y_sample, depends_on_theta=False),
    ]


def sample_regression(theta, rng, p=1, sigma=1.0, design_matrix=None, n_obs=50, noise_sd=1.0):
    """Simulate ``(X, y, w1, w2)`` from the lasso regression hierarchy."""
    if design_matrix is None:
        design_matrix = rng.standard_normal((n_obs, p))
    x = np.asarray(design_matrix, dtype=float)
    w2 = rng.gamma(2.0, 1.0 / theta, size=p)
    w1 = rng.uniform(-sigma * w2, sigma * w2)
    y = x @ w1 + noise_sd * rng.standard_normal(x.shape[0])
    return x, y, w1, w2
