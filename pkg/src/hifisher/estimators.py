"""Seeded Monte Carlo and finite-difference machinery for Fisher terms."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .core.types import ConditionalSpec, FisherMatrix, ParamPoint, empty_given
from .errors import StepUnderflow, TooManyRejections
from .quadrature import laplace_rule, to_axis

__all__ = [
    "EstimatorConfig",
    "McEstimate",
    "mc_expectation",
    "nested_expectation",
    "numeric_conditional_fisher",
    "neg_hessian",
    "fd_steps",
    "conditional_fisher_rows",
    "top_level_fisher",
]

MAX_REJECT_FRACTION = 0.01
ANALYTIC_LEVELS = ("all", "per_draw", "none")


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator settings; every random stream is derived from ``seed``.

    ``analytic`` selects the dispatch: ``"all"`` uses closed-form
    expectations and per-draw Fisher providers, ``"per_draw"`` drops the
    closed-form expectations, ``"none"`` forces the finite-difference
    fallbacks everywhere.  ``inner_method`` chooses how a numeric conditional
    Fisher integrates over its variable: ``"mc"`` (``n_inner`` draws) or
    ``"quadrature"`` (one-dimensional laws only).  ``stream`` is the
    counter prefix used for deterministic stream splitting.
    """

    n_outer: int = 20_000
    n_inner: int = 1
    seed: int = 0
    fd_step: float = 1e-4
    quad_points: int = 201
    quad_range_sd: float = 12.0
    analytic: str = "all"
    exact_finite: bool = True
    inner_method: str = "mc"
    stream: tuple = field(default=())

    def __post_init__(self):
        if int(self.n_outer) < 100:
            raise ValueError("n_outer must be >= 100")
        if int(self.n_inner) < 1:
            raise ValueError("n_inner must be >= 1")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        if not (1e-8 < self.fd_step < 1e-1):
            raise ValueError("fd_step must lie in (1e-8, 1e-1)")
        if self.quad_points < 21 or self.quad_points % 2 == 0:
            raise ValueError("quad_points must be odd and >= 21")
        if self.quad_range_sd <= 0:
            raise ValueError("quad_range_sd must be positive")
        if self.analytic not in ANALYTIC_LEVELS:
            raise ValueError(f"analytic must be one of {ANALYTIC_LEVELS}")
        if self.inner_method not in ("mc", "quadrature"):
            raise ValueError("inner_method must be 'mc' or 'quadrature'")
        object.__setattr__(self, "stream", tuple(int(s) for s in self.stream))

    def rng(self, *key):
        ss = np.random.SeedSequence(int(self.seed), spawn_key=self.stream + tuple(key))
        return np.random.Generator(np.random.PCG64(ss))

    def at(self, *stream):
        """Config for a sub-task (e.g. one grid point) with its own streams."""
        return replace(self, stream=self.stream + tuple(int(s) for s in stream))

    @property
    def use_expected(self):
        return self.analytic == "all"

    @property
    def use_per_draw(self):
        return self.analytic in ("all", "per_draw")


@dataclass(frozen=True, eq=False)
class McEstimate:
    mean: np.ndarray
    stderr: np.ndarray
    n_used: int
    n_rejected: int = 0

    def __post_init__(self):
        if np.any(np.asarray(self.stderr) < 0):
            raise ValueError("stderr entries must be non-negative")

    def to_fisher(self, method="monte_carlo", flags=()):
        return FisherMatrix(self.mean, self.stderr, method, flags)


def summarize(values, context=""):
    """Mean and entrywise standard error over the leading axis of ``values``.

    Rows containing a non-finite entry are dropped and counted.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    flat = values.reshape(n, -1)
    good = np.all(np.isfinite(flat), axis=1)
    n_used = int(good.sum())
    n_rej = n - n_used
    if n_used == 0 or n_rej > MAX_REJECT_FRACTION * n_used:
        first = int(np.flatnonzero(~good)[0]) if n_rej else None
        raise TooManyRejections(
            f"{n_rej} of {n} evaluations non-finite{context}"
            + (f"; first offending draw index {first}" if first is not None else "")
        )
    kept = values[good]
    mean = kept.mean(axis=0)
    if n_used > 1:
        se = kept.std(axis=0, ddof=1) / np.sqrt(n_used)
    else:
        se = np.zeros_like(mean)
    return McEstimate(mean, se, n_used, n_rej)


def mc_expectation(draw: Callable, f: Callable, cfg: EstimatorConfig, key=(0,)) -> McEstimate:
    """Plain Monte Carlo mean of a matrix-valued ``f`` over ``draw(rng, n)``."""
    rng = cfg.rng(*key)
    x = draw(rng, cfg.n_outer)
    return summarize(f(x))


def nested_expectation(model, theta: ParamPoint, f_of_y: Callable, cfg: EstimatorConfig, key=(0,)) -> McEstimate:
    """E_y[f(y)] through the hierarchy: w ~ f2(.|theta), then y ~ f1(.|w, theta).

    When both levels are finite and ``cfg.exact_finite`` is set the
    expectation is an exact double sum over the supports.
    """
    t = theta.free
    l1, l2 = model.level1, model.level2
    if cfg.exact_finite and l1.kind == "finite" and l2.kind == "finite":
        ws = l2.support
        pw = np.exp(l2.logpdf(ws, empty_given(len(ws)), t))
        ys = l1.support
        m = len(ys)
        py = np.zeros(m)
        for k, w in enumerate(ws):
            if pw[k] > 0:
                py += pw[k] * np.exp(l1.logpdf(ys, np.repeat(w[None, :], m, axis=0), t))
        keep = py > 0
        vals = np.asarray(f_of_y(ys[keep]), dtype=float)
        mean = np.tensordot(py[keep] / py[keep].sum(), vals, axes=1)
        return McEstimate(mean, np.zeros_like(mean), int(keep.sum()), 0)
    rng = cfg.rng(*key)
    w = l2.draw(rng, empty_given(cfg.n_outer), t)
    y = l1.draw(rng, w, t)
    return summarize(f_of_y(y), context=f" at theta={theta.values.tolist()}")


def fd_steps(theta: ParamPoint, cfg: EstimatorConfig, reach=2.0):
    """Per-coordinate steps h_i = max(fd_step*|theta_i|, 1e-6), halved (at most
    8 times) until every stencil point ``theta +- reach*h`` stays in the domain."""
    t = theta.free
    h = np.maximum(cfg.fd_step * np.abs(t), 1e-6)
    d = t.size
    for _ in range(9):
        ok = True
        for i in range(d):
            for j in range(i, d):
                for si in (-1, 1):
                    for sj in (-1, 1):
                        p = t.copy()
                        p[i] += si * reach * h[i]
                        p[j] += sj * reach * h[j]
                        if not theta.domain.admits_free(p):
                            ok = False
        if ok:
            return h
        h = 0.5 * h
    raise StepUnderflow(f"finite-difference stencil leaves the domain at theta={theta.values.tolist()}")


def neg_hessian(logf: Callable, x, theta: ParamPoint, cfg: EstimatorConfig, steps=None):
    """Per-row ``-d^2/dtheta_i dtheta_j log f(x_row | theta)``.

    Fourth-order central differences: five points on the diagonal and the
    Richardson-combined corner stencil at ``h`` and ``2h`` off the diagonal
    (nine points per entry including the centre).

    Returns
    -------
    ndarray, shape (n, d, d)
    """
    t = theta.free
    d = t.size
    h = fd_steps(theta, cfg) if steps is None else steps
    cache = {}

    def at(offset):
        k = tuple(np.round(offset, 6))
        if k not in cache:
            cache[k] = np.asarray(logf(x, t + offset * h), dtype=float)
        return cache[k]

    e = np.eye(d)
    f0 = at(np.zeros(d))
    n = f0.shape[0]
    out = np.empty((n, d, d))
    with np.errstate(invalid="ignore"):
        for i in range(d):
            ei = e[i]
            # differences against f0 so a theta-free density gives exactly 0
            num = 16 * ((at(ei) - f0) + (at(-ei) - f0)) - ((at(2 * ei) - f0) + (at(-2 * ei) - f0))
            out[:, i, i] = -num / (12 * h[i] ** 2)
            for j in range(i + 1, d):
                ej = e[j]
                s1 = at(ei + ej) - at(ei - ej) - at(-ei + ej) + at(-ei - ej)
                s2 = at(2 * ei + 2 * ej) - at(2 * ei - 2 * ej) - at(-2 * ei + 2 * ej) + at(-2 * ei - 2 * ej)
                val = -(16 * s1 - s2) / (48 * h[i] * h[j])
                out[:, i, j] = val
                out[:, j, i] = val
    bad = ~np.isfinite(f0)
    out[bad] = np.nan
    return out


def _weighted_rows(logw, vals):
    """Normalized-weight average over axis 1 of ``vals`` (n, m, d, d)."""
    logw = np.where(np.isfinite(logw), logw, -np.inf)
    top = np.max(logw, axis=1, keepdims=True)
    w = np.exp(logw - top)
    w = w / w.sum(axis=1, keepdims=True)
    vals = np.where(w[..., None, None] > 0, vals, 0.0)
    return np.einsum("nm,nmij->nij", w, vals)


def conditional_fisher_rows(spec: ConditionalSpec, given, theta: ParamPoint, cfg: EstimatorConfig, rng=None):
    """Conditional Fisher I(theta | given_row) for each row of ``given``.

    Analytic provider first (unless disabled); otherwise finite-difference
    Hessians of the log density averaged over the law: exactly for finite
    support, by Laplace-window quadrature when ``cfg.inner_method`` is
    ``"quadrature"`` and the law is one-dimensional, else over ``n_inner``
    draws.
    """
    t = theta.free
    d = t.size
    given = np.asarray(given, dtype=float)
    n = given.shape[0]
    if not spec.depends_on_theta:
        return np.zeros((n, d, d))
    if spec.fisher is not None and cfg.use_per_draw:
        return np.asarray(spec.fisher(given, t), dtype=float).reshape(n, d, d)
    steps = fd_steps(theta, cfg)
    if spec.kind == "finite":
        sup = spec.support
        m = len(sup)
        xs = np.tile(sup, (n, 1))
        gs = np.repeat(given, m, axis=0)
        logw = spec.logpdf(xs, gs, t).reshape(n, m)
        H = neg_hessian(lambda xx, tt: spec.logpdf(xx, gs, tt), xs, theta, cfg, steps).reshape(n, m, d, d)
        return _weighted_rows(logw, H)
    if cfg.inner_method == "quadrature" and spec.dim == 1:
        def logf_t(tq):
            xq, jac = to_axis(spec.kind, tq)
            rows = np.repeat(given, tq.shape[1], axis=0)
            return spec.logpdf(xq.reshape(-1, 1), rows, t).reshape(tq.shape) + jac

        tq, wq = laplace_rule(logf_t, n, cfg.quad_points, cfg.quad_range_sd, spec.kind)
        q = tq.shape[1]
        xq, _ = to_axis(spec.kind, tq)
        gs = np.repeat(given, q, axis=0)
        H = neg_hessian(lambda xx, tt: spec.logpdf(xx, gs, tt), xq.reshape(-1, 1), theta, cfg, steps)
        return _weighted_rows(logf_t(tq) + np.log(wq), H.reshape(n, q, d, d))
    if rng is None:
        rng = cfg.rng(99)
    k = cfg.n_inner
    gs = np.repeat(given, k, axis=0)
    xs = spec.draw(rng, gs, t)
    H = neg_hessian(lambda xx, tt: spec.logpdf(xx, gs, tt), xs, theta, cfg, steps)
    return H.reshape(n, k, d, d).mean(axis=1)


def top_level_fisher(spec: ConditionalSpec, theta: ParamPoint, cfg: EstimatorConfig, key=(0,)) -> FisherMatrix:
    """Fisher information of a law with no conditioning variables."""
    t = theta.free
    d = t.size
    if not spec.depends_on_theta:
        return FisherMatrix(np.zeros((d, d)), np.zeros((d, d)), "analytic", ("theta_free",))
    if spec.fisher is not None and cfg.use_per_draw:
        return FisherMatrix(np.asarray(spec.fisher(empty_given(1), t)).reshape(d, d), None, "analytic")
    if spec.kind == "finite" or (cfg.inner_method == "quadrature" and spec.dim == 1):
        rows = conditional_fisher_rows(spec, empty_given(1), theta, cfg)
        return FisherMatrix(rows[0], np.zeros((d, d)), "finite_difference")

    def logdens(x, tt):
        return spec.logpdf(x, empty_given(len(x)), tt)

    def sampler(rng, n):
        return spec.draw(rng, empty_given(n), t)

    return numeric_conditional_fisher(logdens, sampler, theta, cfg, key=key)


def numeric_conditional_fisher(
    logdens: Callable,
    sampler: Optional[Callable],
    theta: ParamPoint,
    cfg: EstimatorConfig,
    *,
    support=None,
    key=(0,),
) -> FisherMatrix:
    """Estimate ``-E_x[d^2 log p(x | theta)]`` by finite differences.

    Parameters
    ----------
    logdens : callable
        ``logdens(x, theta_free)`` vectorized over the rows of ``x``.
    sampler : callable or None
        ``sampler(rng, n)`` returning ``n`` draws at ``theta``.  Ignored
        when ``support`` is given.
    theta : ParamPoint
    cfg : EstimatorConfig
        ``n_outer`` draws are averaged.
    support : array_like, optional
        Finite support; the expectation is then an exact weighted sum.

    Returns
    -------
    FisherMatrix
    """
    t = theta.free
    d = t.size
    steps = fd_steps(theta, cfg)
    if support is not None:
        xs = np.asarray(support, dtype=float)
        xs = xs.reshape(len(xs), -1)
        logw = np.asarray(logdens(xs, t), dtype=float)
        H = neg_hessian(logdens, xs, theta, cfg, steps)
        mean = _weighted_rows(logw[None, :], H[None])[0]
        return FisherMatrix(mean, np.zeros((d, d)), "finite_difference")
    rng = cfg.rng(*key)
    xs = sampler(rng, cfg.n_outer)
    H = neg_hessian(logdens, xs, theta, cfg, steps)
    est = summarize(H, context=f" at theta={theta.values.tolist()}")
    return est.to_fisher("monte_carlo")
