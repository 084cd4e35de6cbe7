"""Finite mixtures ``f(y | theta) = sum_k theta_k g_k(y)`` with known components.

The weights live on the open simplex; Fisher matrices use the free
coordinates ``(theta_1, ..., theta_p)`` with ``theta_0 = 1 - sum``.  The
component label ``w`` is the latent variable, so level 1 is free of theta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..core.types import ConditionalSpec, Domain, FisherMatrix, HierarchicalModel, ParamPoint
from ..quadrature import composite_rule
from ._common import col, normal_logpdf

NORMALIZATION_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Component:
    """A fixed univariate density with a sampler.

    Discrete components carry their ``support``; continuous ones an
    effective range ``[lo, hi]`` outside which the density is negligible.
    """

    name: str
    logpdf: Callable[[np.ndarray], np.ndarray]
    sample: Callable[[np.random.Generator, int], np.ndarray]
    support: Optional[np.ndarray] = None
    lo: float = -math.inf
    hi: float = math.inf

    @property
    def discrete(self):
        return self.support is not None

    def total_mass(self):
        if self.discrete:
            return float(np.exp(self.logpdf(self.support)).sum())
        y, wq = composite_rule(self.lo, self.hi, 400, 20)
        return float(np.sum(wq * np.exp(self.logpdf(y))))


def gaussian_component(mean, sd) -> Component:
    mean, sd = float(mean), float(sd)
    if not sd > 0:
        raise ValueError("component sd must be positive")
    return Component(
        f"N({mean:g},{sd:g}^2)",
        lambda y: normal_logpdf(np.asarray(y, dtype=float), mean, sd * sd),
        lambda rng, n: mean + sd * rng.standard_normal(n),
        lo=mean - 40.0 * sd,
        hi=mean + 40.0 * sd,
    )


def discrete_component(probs, support=None) -> Component:
    probs = np.asarray(probs, dtype=float)
    if np.any(probs < 0):
        raise ValueError("probabilities must be non-negative")
    support = np.arange(len(probs), dtype=float) if support is None else np.asarray(support, dtype=float)
    if support.shape != probs.shape or len(np.unique(support)) != len(support):
        raise ValueError("support must be distinct points matching the probabilities")
    order = np.argsort(support)
    support, probs = support[order], probs[order]
    with np.errstate(divide="ignore"):
        logp = np.log(probs)

    def logpdf(y):
        y = np.asarray(y, dtype=float)
        idx = np.clip(np.searchsorted(support, y), 0, len(support) - 1)
        return np.where(support[idx] == y, logp[idx], -np.inf)

    def sample(rng, n):
        return support[rng.choice(len(probs), size=n, p=probs / probs.sum())]

    return Component(f"discrete{probs.tolist()}", logpdf, sample, support=support)


@dataclass(frozen=True, eq=False)
class MixtureSpec:
    components: Sequence[Component] = field(default_factory=tuple)

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) < 2:
            raise ValueError("a mixture needs at least two components")
        kinds = {c.discrete for c in comps}
        if len(kinds) != 1:
            raise ValueError("components must be all discrete or all continuous")
        for c in comps:
            mass = c.total_mass()
            if abs(mass - 1.0) > NORMALIZATION_TOL:
                raise ValueError(f"component {c.name} has total mass {mass!r}, not 1")
        object.__setattr__(self, "components", comps)

    @property
    def p(self):
        return len(self.components) - 1

    @property
    def discrete(self):
        return self.components[0].discrete

    def support(self):
        """Union of the component supports (discrete case)."""
        return np.unique(np.concatenate([c.support for c in self.components]))

    def log_components(self, y):
        """``log g_k(y)`` as an ``(n, p+1)`` array."""
        y = np.asarray(y, dtype=float).ravel()
        return np.stack([c.logpdf(y) for c in self.components], axis=1)


def _weights(free):
    free = np.asarray(free, dtype=float)
    return np.concatenate([[1.0 - free.sum()], free])


def _posterior_ratios(spec, y, weights):
    """``r_k = g_k(y) / m(y)`` and ``log m(y)``, computed in log space."""
    lg = spec.log_components(y)
    with np.errstate(divide="ignore"):
        lw = np.log(weights)
    a = lg + lw
    top = np.max(a, axis=1, keepdims=True)
    log_m = (top + np.log(np.sum(np.exp(a - top), axis=1, keepdims=True)))[:, 0]
    return np.exp(lg - log_m[:, None]), log_m


def mixture_latent_fisher(spec: MixtureSpec, theta: ParamPoint) -> FisherMatrix:
    """Categorical information ``1/theta_0 + delta_ij / theta_i``."""
    t = theta.values
    if len(t) != spec.p + 1:
        raise ValueError("weight vector length does not match the number of components")
    return FisherMatrix(_latent_fisher(t[1:]), np.zeros((spec.p, spec.p)), "analytic")


def _latent_fisher(free):
    w = _weights(free)
    return 1.0 / w[0] + np.diag(1.0 / w[1:])


def _conditional_rows(spec, y, free):
    w = _weights(free)
    r, _ = _posterior_ratios(spec, y, w)
    q = r * w
    p = spec.p
    # dq_k/dtheta_i = r_k (delta_ki - delta_k0) - q_k (r_i - r_0); summing
    # dq dq^T / q keeps every row PSD with no cancellation
    sel = np.zeros((p + 1, p))
    sel[1:] = np.eye(p)
    sel[0] = -1.0
    dq = r[:, :, None] * sel[None] - q[:, :, None] * (r[:, None, 1:] - r[:, None, :1])
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(q[:, :, None] > 0, dq / np.sqrt(np.where(q > 0, q, 1.0))[:, :, None], 0.0)
    return np.einsum("nki,nkj->nij", scaled, scaled)


def mixture_conditional_fisher(spec: MixtureSpec, theta: ParamPoint, y) -> np.ndarray:
    """Information of the label posterior ``P(w=k | y) = theta_k g_k(y) / m(y)``.

    Entry ``(i, j)`` equals ``delta_ij r_i / theta_i + r_0 / theta_0 -
    (r_i - r_0)(r_j - r_0)`` with ``r_k = g_k(y)/m(y)``, evaluated as the
    categorical sum ``sum_k dq_k dq_k^T / q_k`` so it stays PSD; for two
    components it reduces to ``g_1 g_0 / (theta (1 - theta) m^2)``.

    Returns
    -------
    ndarray, shape (n, p, p)
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    _, log_m = _posterior_ratios(spec, y, theta.values)
    if np.any(~np.isfinite(log_m)):
        raise ValueError("mixture density vanishes at some y")
    return _conditional_rows(spec, y, theta.free)


def direct_fisher(spec: MixtureSpec, free) -> np.ndarray:
    """Marginal information ``sum_y (g_i - g_0)(g_j - g_0) / m`` (or its integral)."""
    w = _weights(free)
    if spec.discrete:
        y = spec.support()
        wq = np.ones(len(y))
    else:
        lo = min(c.lo for c in spec.components)
        hi = max(c.hi for c in spec.components)
        y, wq = composite_rule(lo, hi, 800, 20)
    r, log_m = _posterior_ratios(spec, y, w)
    d = r[:, 1:] - r[:, :1]
    m = np.exp(log_m)
    return np.einsum("n,ni,nj->ij", wq * m, d, d)


def make_mixture(components: Optional[Sequence[Component]] = None) -> HierarchicalModel:
    if components is None:
        components = (gaussian_component(-2.0, 1.0), gaussian_component(2.0, 1.0))
    spec = MixtureSpec(components)
    p = spec.p
    labels = np.arange(p + 1, dtype=float)[:, None]

    def label_index(w):
        return np.asarray(np.rint(col(w)), dtype=int)

    def l1_logpdf(y, w, t):
        lg = spec.log_components(col(y))
        return lg[np.arange(len(lg)), label_index(w)]

    def l1_sample(rng, w, t):
        k = label_index(w)
        out = np.empty(len(k))
        for j, c in enumerate(spec.components):
            sel = k == j
            if sel.any():
                out[sel] = c.sample(rng, int(sel.sum()))
        return out[:, None]

    def l2_logpdf(w, given, t):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(_weights(t))[label_index(w)]

    def l2_sample(rng, given, t):
        return rng.choice(p + 1, size=len(given), p=_weights(t)).astype(float)[:, None]

    def l2_fisher(given, t):
        return np.broadcast_to(_latent_fisher(t), (len(given), p, p)).copy()

    def cc_logpdf(w, y, t):
        with np.errstate(divide="ignore", invalid="ignore"):
            r, _ = _posterior_ratios(spec, col(y), _weights(t))
            logq = np.log(r * _weights(t))
        return logq[np.arange(len(logq)), label_index(w)]

    def cc_sample(rng, y, t):
        r, _ = _posterior_ratios(spec, col(y), _weights(t))
        q = r * _weights(t)
        u = rng.random(len(q))[:, None]
        return np.minimum(np.sum(np.cumsum(q, axis=1) < u, axis=1), p).astype(float)[:, None]

    def cc_fisher(y, t):
        return _conditional_rows(spec, col(y), t)

    support = spec.support()[:, None] if spec.discrete else None
    kind = "finite" if spec.discrete else "real"
    theta_check = np.full(p + 1, 1.0 / (p + 1))
    other = np.linspace(1.0, 2.0, p + 1)
    return HierarchicalModel(
        name="mixture",
        domain=Domain.open_simplex(),
        theta_dim=p,
        latent_dim=1,
        obs_dim=1,
        level1=ConditionalSpec("y|w", 1, l1_logpdf, l1_sample, depends_on_theta=False, kind=kind, support=support),
        level2=ConditionalSpec("w|theta", 1, l2_logpdf, l2_sample, fisher=l2_fisher, kind="finite", support=labels),
        complete_conditional=ConditionalSpec(
            "w|theta,y", 1, cc_logpdf, cc_sample, fisher=cc_fisher, kind="finite", support=labels
        ),
        marginal=lambda y, t: _posterior_ratios(spec, col(y), _weights(t))[1],
        reference_marginal_fisher=lambda t: direct_fisher(spec, t),
        check_thetas=(theta_check, other / other.sum()),
        params={"components": [c.name for c in spec.components], "spec": spec},
    )
