"""Independent ground truth: quadrature marginals, score variance, KL Hessian.

Nothing here uses the Fisher decomposition.  The marginal ``f(y | theta)``
is integrated over a scalar latent by Gauss-Legendre on a Laplace window
(log axis for positive latents) or summed exactly over a finite latent.
Integrals over a real ``y`` use the substitution ``y = c + s sinh(u)``,
centred and scaled from a pilot sample, so heavy tails are covered by a
finite ``u`` range.  Finite observation laws are summed exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core.types import FisherMatrix, HierarchicalModel, ParamPoint, empty_given
from .errors import QuadratureNotConverged
from .estimators import EstimatorConfig, fd_steps
from .quadrature import composite_rule, laplace_window, map_rule, to_axis

ORACLE_FD_STEP = 1e-3
MARGINAL_RTOL = 1e-6
DROP_NATS = 40.0
Y_CAP = 1e150
PANEL_WIDTH = 0.5
PANEL_NODES = 20
PILOT_DRAWS = 4000


def _point(model, theta):
    if isinstance(theta, ParamPoint):
        return theta
    return model.point(theta)


def _logsumexp(a, axis=-1):
    top = np.max(a, axis=axis, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        return np.squeeze(top, axis) + np.log(np.sum(np.exp(a - top), axis=axis))


def _check_scope(model: HierarchicalModel):
    if model.oracle_exempt:
        raise ValueError(f"oracle not applicable to {model.name}: {model.oracle_exempt}")
    if model.latent_dim != 1 or model.obs_dim != 1:
        raise ValueError("oracles need a scalar latent and a scalar observation")


class _LatentRule:
    """Latent quadrature nodes for a batch of ``y`` values, frozen at one theta.

    Reusing the nodes at nearby theta keeps quadrature error smooth in
    theta, which finite differences of ``log f(y | theta)`` rely on.
    """

    def __init__(self, model, y, t_center, n_points=201, range_sd=12.0):
        self.model = model
        self.y = np.asarray(y, dtype=float).reshape(-1, 1)
        l2 = model.level2
        n = len(self.y)
        if l2.kind == "finite":
            self.kind = "finite"
            self.x = np.broadcast_to(l2.support[:, 0], (n, len(l2.support)))
            self.logw = np.zeros(self.x.shape)
            self.jac = np.zeros(self.x.shape)
            return
        self.kind = l2.kind
        lo, hi = laplace_window(lambda tq: self._log_joint(tq, t_center), n, range_sd, l2.kind)
        self.lo, self.hi = lo, hi
        self._set_nodes(n_points)

    def _set_nodes(self, n_points):
        tq, wq = map_rule(self.lo, self.hi, n_points)
        self.x, self.jac = to_axis(self.kind, tq)
        self.logw = np.log(wq)

    def _log_joint(self, tq, t):
        x, jac = to_axis(self.kind, tq)
        return self._log_joint_x(x, t) + jac

    def _log_joint_x(self, x, t):
        n, q = x.shape
        xs = x.reshape(-1, 1)
        ys = np.repeat(self.y, q, axis=0)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            l1 = self.model.level1.logpdf(ys, xs, t)
            l2 = self.model.level2.logpdf(xs, empty_given(len(xs)), t)
        out = (l1 + l2).reshape(n, q)
        return np.where(np.isnan(out), -np.inf, out)

    def log_marginal(self, t):
        return _logsumexp(self._log_joint_x(self.x, t) + self.jac + self.logw)

    def refined(self, n_points):
        if self.kind == "finite":
            return self
        other = object.__new__(_LatentRule)
        other.model, other.y, other.kind, other.lo, other.hi = self.model, self.y, self.kind, self.lo, self.hi
        other._set_nodes(n_points)
        return other


def _latent_rule_checked(model, y, t, n_points=201, range_sd=12.0):
    rule = _LatentRule(model, y, t, n_points, range_sd)
    if rule.kind == "finite":
        return rule
    a = rule.log_marginal(t)
    b = rule.refined(2 * n_points - 1).log_marginal(t)
    diff = np.abs(np.expm1(b - a))
    if np.any(~(diff <= MARGINAL_RTOL)):
        k = int(np.argmax(np.where(np.isfinite(diff), diff, np.inf)))
        raise QuadratureNotConverged(
            f"latent quadrature changed by {diff[k]:.3g} relative on doubling at y={float(rule.y[k, 0])!r}"
        )
    return rule


def log_marginal_quadrature(model: HierarchicalModel, theta, y, n_points=201, range_sd=12.0):
    """``log f(y | theta)`` by latent quadrature (exact sum for finite latents)."""
    _check_scope(model)
    theta = _point(model, theta)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    rule = _latent_rule_checked(model, y, theta.free, n_points, range_sd)
    return rule.log_marginal(theta.free)


def marginal_density_quadrature(model: HierarchicalModel, theta, y, n_points=201, range_sd=12.0):
    """``f(y | theta) = int f1(y | w, theta) f2(w | theta) dw``.

    Raises
    ------
    QuadratureNotConverged
        If doubling the latent nodes moves the result by more than 1e-6
        relative.
    """
    scalar = np.ndim(y) == 0
    out = np.exp(log_marginal_quadrature(model, theta, y, n_points, range_sd))
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class _YRule:
    y: np.ndarray
    w: np.ndarray
    y_check: np.ndarray
    w_check: np.ndarray
    finite: bool


def _y_scale(model, theta, seed):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(7, 7))))
    t = theta.free
    w = model.level2.draw(rng, empty_given(PILOT_DRAWS), t)
    y = model.level1.draw(rng, w, t)[:, 0]
    c = float(np.median(y))
    q75, q25 = np.percentile(y, [75, 25])
    s = float((q75 - q25) / 1.349)
    return c, (s if s > 0 else 1.0)


def _y_rule(model, theta, logf_center, seed):
    """Nodes in ``y`` covering the marginal until it is 40 nats down."""
    l1 = model.level1
    if l1.kind == "finite":
        y = l1.support[:, 0]
        ones = np.ones(len(y))
        return _YRule(y, ones, y, ones, True)
    c, s = _y_scale(model, theta, seed)
    u_max = math.asinh((Y_CAP - abs(c)) / s)

    def logf_u(u):
        y = c + s * np.sinh(u)
        return logf_center(y) + np.log(s * np.cosh(u))

    probe = np.linspace(-4.0, 4.0, 81)
    peak = float(np.max(logf_u(probe)))
    lo, hi = -8.0, 8.0
    while lo > -u_max and logf_u(np.array([lo]))[0] > peak - DROP_NATS:
        lo = max(lo - 4.0, -u_max)
    while hi < u_max and logf_u(np.array([hi]))[0] > peak - DROP_NATS:
        hi = min(hi + 4.0, u_max)
    panels = int(math.ceil((hi - lo) / PANEL_WIDTH))
    u, wu = composite_rule(lo, hi, panels, PANEL_NODES)
    uc, wc = composite_rule(lo, hi, panels, PANEL_NODES // 2)
    return _YRule(
        c + s * np.sinh(u), wu * s * np.cosh(u), c + s * np.sinh(uc), wc * s * np.cosh(uc), False
    )


class _MarginalEvaluator:
    """``log f(y | theta')`` on fixed ``y`` nodes for theta' near theta."""

    def __init__(self, model, y, theta, analytic, n_points, range_sd):
        self.model = model
        self.y = np.asarray(y, dtype=float)
        self.analytic = analytic and model.marginal is not None
        if not self.analytic:
            self.rule = _latent_rule_checked(model, self.y, theta.free, n_points, range_sd)

    def __call__(self, t):
        if self.analytic:
            return np.asarray(self.model.marginal(self.y.reshape(-1, 1), t), dtype=float)
        return self.rule.log_marginal(t)


def _prepare(model, theta, cfg, analytic):
    _check_scope(model)
    theta = _point(model, theta)
    t = theta.free

    def logf_center(y):
        return _MarginalEvaluator(model, y, theta, analytic, cfg.quad_points, cfg.quad_range_sd)(t)

    rule = _y_rule(model, theta, logf_center, cfg.seed)
    steps = fd_steps(theta, replace(cfg, fd_step=ORACLE_FD_STEP))
    return theta, rule, steps


def _score_fisher(model, theta, y, w, steps, analytic, cfg):
    ev = _MarginalEvaluator(model, y, theta, analytic, cfg.quad_points, cfg.quad_range_sd)
    t = theta.free
    d = t.size
    l0 = ev(t)
    f = np.exp(l0)
    scores = np.empty((len(y), d))
    for i in range(d):
        e = np.zeros(d)
        e[i] = steps[i]
        scores[:, i] = (-ev(t + 2 * e) + 8 * ev(t + e) - 8 * ev(t - e) + ev(t - 2 * e)) / (12 * steps[i])
    keep = f > 0
    wf = (w * f)[keep]
    s = scores[keep]
    return np.einsum("n,ni,nj->ij", wf, s, s), float(np.sum(w * f))


def score_variance_fisher(model: HierarchicalModel, theta, cfg: EstimatorConfig, analytic_marginal=False) -> FisherMatrix:
    """``Var_y[grad log f(y | theta)]`` by quadrature over ``y``.

    The score is a fourth-order central difference (relative step 1e-3)
    of the log marginal.  ``stderr`` holds the gap to a half-order rule
    plus the mass missing from the ``y`` range times the estimate.  Uses
    the latent-quadrature marginal unless ``analytic_marginal`` is set.
    """
    theta, rule, steps = _prepare(model, theta, cfg, analytic_marginal)
    fisher, mass = _score_fisher(model, theta, rule.y, rule.w, steps, analytic_marginal, cfg)
    if rule.finite:
        err = np.zeros_like(fisher)
    else:
        check, _ = _score_fisher(model, theta, rule.y_check, rule.w_check, steps, analytic_marginal, cfg)
        err = np.abs(fisher - check) + abs(1.0 - mass) * np.abs(fisher)
    return FisherMatrix(fisher, err, "quadrature", (f"y_mass={mass:.12f}",))


def marginal_total_mass(model: HierarchicalModel, theta, cfg: EstimatorConfig) -> float:
    """``int f(y | theta) dy`` over the oracle's ``y`` nodes (should be 1)."""
    theta, rule, _ = _prepare(model, theta, cfg, False)
    ev = _MarginalEvaluator(model, rule.y, theta, False, cfg.quad_points, cfg.quad_range_sd)
    return float(np.sum(rule.w * np.exp(ev(theta.free))))


def _kl_values(ev, l0, f, w, t, deltas):
    out = []
    for delta in deltas:
        lg = ev(t + delta)
        # generalized form f log(f/g) - f + g is pointwise >= 0 and O(delta^2)
        with np.errstate(invalid="ignore"):
            term = f * (l0 - lg) - f + np.exp(lg)
        out.append(float(np.sum(np.where(f > 0, w * term, w * np.exp(lg)))))
    return out


def _kl_fisher(model, theta, y, w, steps, analytic, cfg):
    ev = _MarginalEvaluator(model, y, theta, analytic, cfg.quad_points, cfg.quad_range_sd)
    t = theta.free
    d = t.size
    l0 = ev(t)
    f = np.exp(l0)
    e = np.eye(d) * steps
    out = np.empty((d, d))
    for i in range(d):
        kp, km = _kl_values(ev, l0, f, w, t, [e[i], -e[i]])
        out[i, i] = (kp + km) / steps[i] ** 2
        for j in range(i + 1, d):
            a, b, c, dd = _kl_values(ev, l0, f, w, t, [e[i] + e[j], e[i] - e[j], -e[i] + e[j], -e[i] - e[j]])
            out[i, j] = out[j, i] = (a - b - c + dd) / (4 * steps[i] * steps[j])
    return out


def kl_hessian_fisher(model: HierarchicalModel, theta, cfg: EstimatorConfig, analytic_marginal=False) -> FisherMatrix:
    """Hessian of ``delta -> KL(f(.|theta) : f(.|theta + delta))`` at ``delta = 0``.

    Central second differences with relative step 1e-3; the divergence is
    a quadrature (or exact sum) over ``y``.
    """
    theta, rule, steps = _prepare(model, theta, cfg, analytic_marginal)
    fisher = _kl_fisher(model, theta, rule.y, rule.w, steps, analytic_marginal, cfg)
    if rule.finite:
        err = np.zeros_like(fisher)
    else:
        check = _kl_fisher(model, theta, rule.y_check, rule.w_check, steps, analytic_marginal, cfg)
        err = np.abs(fisher - check)
    return FisherMatrix(fisher, err, "quadrature")


def kl_divergence_marginal(model: HierarchicalModel, theta, theta2, cfg: EstimatorConfig) -> float:
    """``KL(f(.|theta) : f(.|theta2))`` by the oracle's quadrature."""
    theta, rule, _ = _prepare(model, theta, cfg, False)
    theta2 = _point(model, theta2)
    ev = _MarginalEvaluator(model, rule.y, theta, False, cfg.quad_points, cfg.quad_range_sd)
    l0 = ev(theta.free)
    return _kl_values(ev, l0, np.exp(l0), rule.w, theta.free, [theta2.free - theta.free])[0]


# ---------------------------------------------------------------------------
# discrete joints

MAX_SIDE = 64
SUM_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class DiscreteJoint:
    """Joint probability table ``P[y, w]`` on finite supports."""

    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim != 2 or p.shape[0] > MAX_SIDE or p.shape[1] > MAX_SIDE or p.size == 0:
            raise ValueError(f"joint table must be at most {MAX_SIDE}x{MAX_SIDE}, got {p.shape}")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("joint probabilities must be finite and non-negative")
        if abs(math.fsum(p.ravel()) - 1.0) > SUM_TOL:
            raise ValueError(f"joint probabilities sum to {math.fsum(p.ravel())!r}")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def marginal_y(self):
        return self.p.sum(axis=1)

    @property
    def marginal_w(self):
        return self.p.sum(axis=0)

    def y_given_w(self):
        m = self.marginal_w
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(m > 0, self.p / m, 0.0)

    def w_given_y(self):
        m = self.marginal_y[:, None]
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(m > 0, self.p / m, 0.0)


def random_joint(rng: np.random.Generator, n_y, n_w, zeros=0.0) -> DiscreteJoint:
    """Random table; ``zeros`` is the chance each cell is set to 0."""
    p = rng.random((n_y, n_w))
    if zeros > 0:
        p = np.where(rng.random(p.shape) < zeros, 0.0, p)
        if p.sum() == 0:
            p[0, 0] = 1.0
    p = p / p.sum()
    p[0, 0] += 1.0 - math.fsum(p.ravel())
    return DiscreteJoint(np.maximum(p, 0.0))


def kl_discrete(f, g):
    """``sum f log(f/g)`` with ``0 log 0 = 0``; ``inf`` if ``g = 0 < f``."""
    f = np.asarray(f, dtype=float).ravel()
    g = np.asarray(g, dtype=float).ravel()
    pos = f > 0
    if np.any(pos & (g <= 0)):
        return math.inf
    return math.fsum(f[pos] * (np.log(f[pos]) - np.log(g[pos])))


@dataclass(frozen=True)
class KLChainResult:
    joint: float
    marginal_w: float
    expected_y_given_w: float
    marginal_y: float
    expected_w_given_y: float
    residual_w_first: float
    residual_y_first: float
    infinite: bool
    infinite_consistent: bool

    @property
    def max_residual(self):
        return max(self.residual_w_first, self.residual_y_first)


def _expected_conditional_kl(weights, fc, gc, axis):
    total = []
    for k, wk in enumerate(weights):
        if wk <= 0:
            continue
        fk = np.take(fc, k, axis=axis)
        gk = np.take(gc, k, axis=axis)
        total.append(wk * kl_discrete(fk, gk))
    if any(math.isinf(v) for v in total):
        return math.inf
    return math.fsum(total)


def _residual(lhs, rhs):
    if math.isinf(lhs) or math.isinf(rhs):
        return 0.0 if (math.isinf(lhs) and math.isinf(rhs)) else math.inf
    return abs(lhs - rhs)


def discrete_kl_chain_check(f: DiscreteJoint, g: DiscreteJoint) -> KLChainResult:
    """Both chain-rule factorizations of ``KL(f : g)`` by exact finite sums.

    ``KL(f_yw : g_yw) = KL(f_w : g_w) + E_{f_w} KL(f_{y|w} : g_{y|w})`` and the
    same with ``y`` and ``w`` swapped.  When ``g`` misses mass of ``f`` the
    divergences are ``inf``; matching ``inf`` on both sides counts as a zero
    residual and is flagged ``infinite_consistent``.
    """
    if f.p.shape != g.p.shape:
        raise ValueError("joints must share their supports")
    joint = kl_discrete(f.p, g.p)
    kl_w = kl_discrete(f.marginal_w, g.marginal_w)
    kl_y = kl_discrete(f.marginal_y, g.marginal_y)
    e_y_w = _expected_conditional_kl(f.marginal_w, f.y_given_w(), g.y_given_w(), axis=1)
    e_w_y = _expected_conditional_kl(f.marginal_y, f.w_given_y(), g.w_given_y(), axis=0)
    rhs_w = kl_w + e_y_w
    rhs_y = kl_y + e_w_y
    res_w = _residual(joint, rhs_w)
    res_y = _residual(joint, rhs_y)
    infinite = math.isinf(joint) or math.isinf(rhs_w) or math.isinf(rhs_y)
    return KLChainResult(
        joint, kl_w, e_y_w, kl_y, e_w_y, res_w, res_y, infinite, infinite and res_w == 0.0 and res_y == 0.0
    )
