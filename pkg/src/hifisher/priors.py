"""Jeffreys-rule priors, the complete-data upper bound and properness checks.

``jeffreys = det(I_y)^(1/2)`` and ``upper_bound = det(I_{y,w})^(1/2)``, both
unnormalized, tabulated over a grid of parameter points.  Properness of a
scalar prior is judged from power-law fits of ``log pi`` against the log
distance to each boundary of the domain.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Optional

import numpy as np

from .core.decomposition import decompose_two_level
from .core.types import FisherMatrix, HierarchicalModel, ParamPoint
from .errors import NonPositiveInformation
from .estimators import EstimatorConfig

TAIL_FRACTION = 0.25
MIN_TAIL_POINTS = 8
MAX_FIT_SE = 0.15
# an exponent of exactly -1 (log divergence) must not be lost to rounding
EXPONENT_ROUNDING = 1e-9
VERDICTS = ("proper", "improper", "inconclusive")


def parse_grid(text):
    """``"min:max:count[:log]"`` to a strictly increasing array."""
    parts = text.split(":")
    if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] not in ("log", "lin", "linear")):
        raise ValueError(f"grid {text!r} must look like min:max:count[:log]")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ValueError(f"grid {text!r} has a non-numeric field") from None
    log = len(parts) == 4 and parts[3] == "log"
    return make_grid(lo, hi, n, log)


def make_grid(lo, hi, n, log=False):
    if not lo < hi:
        raise ValueError(f"grid needs min < max, got {lo} and {hi}")
    if n < 2:
        raise ValueError("grid count must be at least 2")
    if log:
        if lo <= 0:
            raise ValueError("log grid needs a positive minimum")
        return np.geomspace(lo, hi, n)
    return np.linspace(lo, hi, n)


def barycentric_grid(n_weights, depth):
    """Interior simplex points ``k / depth`` with every ``k_i >= 1``.

    There are ``C(depth - 1, n_weights - 1)`` of them.
    """
    if n_weights < 2 or depth < n_weights:
        raise ValueError("need at least two weights and depth >= number of weights")
    pts = []
    for cuts in combinations(range(1, depth), n_weights - 1):
        edges = (0,) + cuts + (depth,)
        pts.append([(edges[i + 1] - edges[i]) / depth for i in range(n_weights)])
    pts = np.array(pts)
    # store exact complements so each row sums to 1 to rounding
    pts[:, 0] = 1.0 - pts[:, 1:].sum(axis=1)
    return pts


def grid_points(model: HierarchicalModel, coords) -> list:
    """ParamPoints from free coordinates (one row, or one scalar, per point)."""
    coords = np.asarray(coords, dtype=float)
    if coords.ndim == 1:
        coords = coords[:, None]
    return [ParamPoint(model.domain.from_free(c), model.domain) for c in coords]


def _sqrt_det(fm: FisherMatrix):
    d = max(fm.det(), 0.0)
    s = fm.det_stderr()
    root = math.sqrt(d)
    se = s / (2.0 * root) if root > 0 else math.sqrt(s)
    return root, se


@dataclass(frozen=True)
class TailFit:
    boundary: float
    exponent: float
    stderr: float
    n_points: int
    status: str  # "integrable", "divergent" or "undetermined"


@dataclass(frozen=True)
class PropernessReport:
    normalization: float
    trapezoid: float
    tails: tuple
    verdict: str

    def tail(self, which):
        """Fit at the ``"lower"`` or ``"upper"`` boundary."""
        return self.tails[0 if which == "lower" else 1]

    def to_dict(self):
        return {
            "normalization": self.normalization,
            "trapezoid": self.trapezoid,
            "verdict": self.verdict,
            "tails": [t.__dict__ for t in self.tails],
        }


@dataclass(frozen=True, eq=False)
class PriorGrid:
    """Tabulated priors over a grid, one record per point."""

    thetas: tuple
    coords: np.ndarray
    reports: tuple
    jeffreys: np.ndarray
    upper_bound: np.ndarray
    stderr: np.ndarray
    upper_stderr: np.ndarray
    domain_bounds: Optional[tuple] = None
    properness: Optional[PropernessReport] = None
    flags: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if np.any(self.jeffreys < 0):
            raise ValueError("Jeffreys values must be non-negative")
        c = self.coords
        if c.shape[1] == 1 and np.any(np.diff(c[:, 0]) <= 0):
            raise ValueError("grid must be strictly increasing")

    @property
    def normalization(self):
        return None if self.properness is None else self.properness.normalization

    @property
    def tail_exponent(self):
        return None if self.properness is None else self.properness.tail("upper").exponent

    @property
    def verdict(self):
        return None if self.properness is None else self.properness.verdict

    def dominance_slack(self):
        """``upper_bound - jeffreys + 3 stderr`` (non-negative when the bound holds)."""
        return self.upper_bound - self.jeffreys + 3.0 * np.hypot(self.stderr, self.upper_stderr)


def _evaluate(model, points, cfg, workers):
    def one(k):
        return decompose_two_level(model, points[k], cfg.at(k))

    idx = range(len(points))
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, idx))
    return [one(k) for k in idx]


def _scalar_bounds(model):
    dom = model.domain
    if dom.simplex:
        return (0.0, 1.0) if model.theta_dim == 1 else None
    return dom.bounds[0] if len(dom.bounds) == 1 else None


def jeffreys_grid(model: HierarchicalModel, grid, cfg: EstimatorConfig, workers=1) -> PriorGrid:
    """Jeffreys and upper-bound priors at each grid point.

    ``grid`` holds free coordinates (a 1-D array for scalar parameters).
    Each point uses its own random streams, so results do not depend on
    ``workers``.  Scalar grids also get a properness diagnostic.
    """
    coords = np.asarray(grid, dtype=float)
    coords2 = coords[:, None] if coords.ndim == 1 else coords
    points = grid_points(model, coords2)
    try:
        reports = _evaluate(model, points, cfg, workers)
    except NonPositiveInformation as exc:
        raise NonPositiveInformation(
            f"{exc} (model {model.name})", eigenvalue=exc.eigenvalue, tolerance=exc.tolerance, theta=exc.theta
        ) from exc
    jeff, se, up, use = (np.empty(len(points)) for _ in range(4))
    for k, r in enumerate(reports):
        jeff[k], se[k] = _sqrt_det(r.i_marginal)
        up[k], use[k] = _sqrt_det(r.i_complete)
    bounds = _scalar_bounds(model)
    out = PriorGrid(tuple(points), coords2, tuple(reports), jeff, up, se, use, bounds)
    if bounds is not None and len(points) >= 2 * MIN_TAIL_POINTS:
        out = replace(out, properness=properness_diagnostic(out))
    return out


def upper_bound_prior(model: HierarchicalModel, grid, cfg: EstimatorConfig, workers=1):
    """``det(I_{y,w})^(1/2)`` per grid point, with standard errors."""
    g = jeffreys_grid(model, grid, cfg, workers)
    return g.upper_bound, g.upper_stderr


# ---------------------------------------------------------------------------
# properness


def _fit_power(x, y):
    """Least-squares slope of y on x with its standard error."""
    n = len(x)
    design = np.column_stack([np.ones(n), x])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    dof = max(n - 2, 1)
    sxx = np.sum((x - x.mean()) ** 2)
    se = math.sqrt(np.sum(resid**2) / dof / sxx) if sxx > 0 else math.inf
    return float(coef[1]), float(se)


def _tail_fit(x, pi, boundary, lower, fraction):
    n = len(x)
    m = max(MIN_TAIL_POINTS, int(math.ceil(fraction * n)))
    sel = slice(0, m) if lower else slice(n - m, n)
    xs, ps = x[sel], pi[sel]
    dist = np.abs(xs) if math.isinf(boundary) else np.abs(xs - boundary)
    ok = (ps > 0) & np.isfinite(ps) & (dist > 0)
    if ok.sum() < MIN_TAIL_POINTS:
        return TailFit(boundary, math.nan, math.inf, int(ok.sum()), "undetermined")
    slope, se = _fit_power(np.log(dist[ok]), np.log(ps[ok]))
    infinite = math.isinf(boundary)
    # integrable when the power is below -1 towards infinity, above -1 towards a finite edge
    margin = (-1.0 - slope) if infinite else (slope + 1.0)
    if se > MAX_FIT_SE:
        status = "undetermined"
    elif margin - 3 * se > EXPONENT_ROUNDING:
        status = "integrable"
    elif margin + 3 * se <= EXPONENT_ROUNDING:
        status = "divergent"
    else:
        status = "undetermined"
    return TailFit(boundary, slope, se, int(ok.sum()), status)


def _tail_mass(fit: TailFit, x_edge, pi_edge):
    if fit.status != "integrable":
        return math.inf if fit.status == "divergent" else math.nan
    if math.isinf(fit.boundary):
        return pi_edge * abs(x_edge) / (-fit.exponent - 1.0)
    return pi_edge * abs(x_edge - fit.boundary) / (fit.exponent + 1.0)


def properness_diagnostic(grid_result: PriorGrid, tail_window=TAIL_FRACTION, column="jeffreys") -> PropernessReport:
    """Normalization estimate and verdict for a scalar prior column.

    Power laws are fitted on the first and last ``tail_window`` fraction of
    the grid (at least 8 points).  At each domain boundary the fit decides
    integrable / divergent when the exponent clears -1 by three fit standard
    errors, and is undetermined when it does not or the fit standard error
    exceeds 0.15.  Any divergent boundary gives "improper", all integrable
    gives "proper", otherwise "inconclusive".  The normalization is the
    trapezoid integral plus the fitted power-law tail masses.
    """
    if grid_result.coords.shape[1] != 1 or grid_result.domain_bounds is None:
        raise ValueError("properness diagnostic needs a scalar grid with known domain bounds")
    if not 0 < tail_window <= 0.5:
        raise ValueError("tail_window must be a fraction in (0, 0.5]")
    x = grid_result.coords[:, 0]
    pi = np.asarray(getattr(grid_result, column), dtype=float)
    lo, hi = grid_result.domain_bounds
    lower = _tail_fit(x, pi, lo, True, tail_window)
    upper = _tail_fit(x, pi, hi, False, tail_window)
    trap = float(np.trapezoid(pi, x)) if hasattr(np, "trapezoid") else float(np.trapz(pi, x))
    total = trap + _tail_mass(lower, x[0], pi[0]) + _tail_mass(upper, x[-1], pi[-1])
    statuses = (lower.status, upper.status)
    if "divergent" in statuses:
        verdict = "improper"
    elif all(s == "integrable" for s in statuses):
        verdict = "proper"
    else:
        verdict = "inconclusive"
    return PropernessReport(float(total), trap, (lower, upper), verdict)


# ---------------------------------------------------------------------------
# Minkowski determinant inequality


@dataclass(frozen=True)
class MinkowskiReport:
    dim: int
    lhs_root_n: float
    rhs_root_n: float
    holds_root_n: bool
    lhs_half: float
    rhs_half: float
    holds_half: bool
    slack_half: float
    slack_stderr: float

    def to_dict(self):
        return dict(self.__dict__)


def minkowski_check(a: FisherMatrix, b: FisherMatrix) -> MinkowskiReport:
    """Both sides of ``det(A+B)^(1/n) >= det(A)^(1/n) + det(B)^(1/n)`` and of
    the square-root form ``det(A+B)^(1/2) >= det(A)^(1/2) + det(B)^(1/2)``.

    An inequality is reported as holding when its slack is at least
    ``-3 SE`` (first-order determinant errors) less a 1e-12 relative
    rounding allowance.
    """
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    n = a.dim
    if n < 2:
        raise ValueError("the determinant inequality is stated for dimension >= 2")
    s = FisherMatrix(a.entries + b.entries, np.sqrt(a.se**2 + b.se**2), a.method)
    da, db, ds = max(a.det(), 0.0), max(b.det(), 0.0), max(s.det(), 0.0)
    lhs_n, rhs_n = ds ** (1.0 / n), da ** (1.0 / n) + db ** (1.0 / n)
    ra, sa = _sqrt_det(a)
    rb, sb = _sqrt_det(b)
    rs, ss = _sqrt_det(s)
    slack = rs - ra - rb
    slack_se = math.sqrt(sa**2 + sb**2 + ss**2)
    tol_n = 1e-12 * max(lhs_n, rhs_n, 1e-300)
    tol_h = 3.0 * slack_se + 1e-12 * max(rs, 1e-300)
    # root-n errors scale like the half-power ones through d/dD D^(1/n)
    se_n = 3.0 * slack_se * (2.0 / n) * max(rs, 1e-300) ** (2.0 / n - 1.0) if slack_se > 0 else 0.0
    return MinkowskiReport(
        n,
        lhs_n,
        rhs_n,
        bool(lhs_n - rhs_n >= -(tol_n + se_n)),
        rs,
        ra + rb,
        bool(slack >= -tol_h),
        slack,
        slack_se,
    )


# ---------------------------------------------------------------------------
# dominance of the latent-level prior


@dataclass(frozen=True)
class DominanceReport:
    dominated: bool
    violations: tuple
    jeffreys_normalization: Optional[float]
    latent_normalization: Optional[float]
    jeffreys_verdict: Optional[str]
    latent_verdict: Optional[str]
    slack: np.ndarray = field(repr=False, default=None)

    def to_dict(self):
        return {
            "dominated": self.dominated,
            "violations": list(self.violations),
            "jeffreys_normalization": self.jeffreys_normalization,
            "latent_normalization": self.latent_normalization,
            "jeffreys_verdict": self.jeffreys_verdict,
            "latent_verdict": self.latent_verdict,
        }


def corollary_properness_check(model: HierarchicalModel, grid, cfg: EstimatorConfig, workers=1) -> DominanceReport:
    """Check ``det(I_y)^(1/2) <= det(I_w)^(1/2)`` at every grid point.

    With a theta-free observation level ``I_w - I_y`` is an expected
    information and hence PSD, so the latent-level Jeffreys prior dominates
    and its properness carries over.  Both normalization estimates are
    reported for scalar grids.
    """
    if model.level1.depends_on_theta:
        raise ValueError(f"{model.name}: the observation level depends on theta")
    g = jeffreys_grid(model, grid, cfg, workers)
    lw = np.array([_sqrt_det(r.i_w)[0] for r in g.reports])
    slack = lw - g.jeffreys + 3.0 * g.stderr + 1e-12 * np.maximum(lw, 1e-300)
    bad = tuple(int(k) for k in np.flatnonzero(slack < 0))
    jn = jv = ln = lv = None
    if g.properness is not None:
        latent = replace(g, jeffreys=lw, properness=None)
        lrep = properness_diagnostic(latent)
        jn, jv, ln, lv = g.properness.normalization, g.properness.verdict, lrep.normalization, lrep.verdict
    return DominanceReport(not bad, bad, jn, ln, jv, lv, slack)


def prior_table(grid_result: PriorGrid) -> list:
    """Rows for tabular output; matrices are reported through determinants."""
    rows = []
    for k, r in enumerate(grid_result.reports):
        rows.append(
            {
                "theta": grid_result.coords[k].tolist(),
                "i_w": r.i_w.det(),
                "e_iw_given_y": r.e_iw_given_y.det(),
                "e_iy_given_w": r.e_iy_given_w.det(),
                "i_y": r.i_marginal.det(),
                "jeffreys": float(grid_result.jeffreys[k]),
                "upper_bound": float(grid_result.upper_bound[k]),
                "stderr_jeffreys": float(grid_result.stderr[k]),
            }
        )
    return rows
