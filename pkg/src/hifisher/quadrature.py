"""Gauss-Legendre rules on data-driven windows.

``laplace_window`` locates the mode of a batch of one-dimensional log
integrands, measures the local curvature, and returns a window of
``quad_range_sd`` Laplace standard deviations, widened on either side until
the integrand has fallen 40 nats below its peak.  Positive variables are
handled on the log axis.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

DROP_NATS = 40.0


@lru_cache(maxsize=32)
def gauss_legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def map_rule(lo, hi, n):
    """Nodes/weights for ``n``-point Gauss-Legendre on rows of ``[lo, hi]``."""
    x, w = gauss_legendre(n)
    lo = np.asarray(lo, dtype=float)[..., None]
    hi = np.asarray(hi, dtype=float)[..., None]
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def composite_rule(lo, hi, panels, n=20):
    """Composite Gauss-Legendre on ``panels`` equal panels of a scalar interval."""
    edges = np.linspace(lo, hi, panels + 1)
    t, w = map_rule(edges[:-1], edges[1:], n)
    return t.ravel(), w.ravel()


def to_axis(kind, t):
    """Map integration-axis values to the variable; returns (x, log|dx/dt|)."""
    if kind == "positive":
        return np.exp(t), t
    return t, np.zeros_like(t)


def laplace_window(logf_t, n_rows, quad_range_sd=12.0, kind="positive"):
    """Mode and integration window for each row of a batch of log integrands.

    Parameters
    ----------
    logf_t : callable
        ``logf_t(t)`` with ``t`` of shape ``(n_rows, m)`` returns the log
        integrand on the integration axis (Jacobian included).
    n_rows : int
    quad_range_sd : float
        Minimum half width in Laplace standard deviations.
    kind : {"positive", "real"}

    Returns
    -------
    lo, hi : ndarray, shape (n_rows,)
    """
    if kind == "positive":
        grid = np.linspace(-80.0, 80.0, 641)
    else:
        grid = np.sinh(np.linspace(-40.0, 40.0, 801))
    vals = logf_t(np.broadcast_to(grid, (n_rows, grid.size)))
    vals = np.where(np.isfinite(vals), vals, -np.inf)
    idx = np.argmax(vals, axis=1)
    left = grid[np.maximum(idx - 1, 0)]
    right = grid[np.minimum(idx + 1, grid.size - 1)]
    # zoom by repeated local grids around the running best point
    for _ in range(40):
        zoom = np.linspace(0.0, 1.0, 21)
        pts = left[:, None] + (right - left)[:, None] * zoom
        v = logf_t(pts)
        v = np.where(np.isfinite(v), v, -np.inf)
        k = np.argmax(v, axis=1)
        rows = np.arange(n_rows)
        best = pts[rows, k]
        span = (right - left) / 20.0
        left, right = best - span, best + span
        if np.all(span <= 1e-9 * np.maximum(1.0, np.abs(best))):
            break
    mode = best
    peak = logf_t(mode[:, None])[:, 0]
    delta = np.full(n_rows, 1e-3)
    for _ in range(3):
        f = logf_t(np.stack([mode - delta, mode, mode + delta], axis=1))
        with np.errstate(invalid="ignore"):
            curv = -(f[:, 0] - 2 * f[:, 1] + f[:, 2]) / delta**2
        # a mode on a support edge has no usable curvature
        smooth = np.isfinite(curv) & (curv > 0)
        sd = np.where(smooth, 1.0 / np.sqrt(np.where(smooth, curv, 1.0)), 1.0)
        delta = np.clip(0.1 * sd, 1e-8, 1.0)
    lo = mode - quad_range_sd * sd
    hi = mode + quad_range_sd * sd
    for _ in range(60):
        f = logf_t(np.stack([lo, hi], axis=1))
        f = np.where(np.isfinite(f), f, -np.inf)
        grow_lo = f[:, 0] > peak - DROP_NATS
        grow_hi = f[:, 1] > peak - DROP_NATS
        if not (grow_lo.any() or grow_hi.any()):
            break
        lo = np.where(grow_lo, lo - 0.5 * (hi - lo), lo)
        hi = np.where(grow_hi, hi + 0.5 * (hi - lo), hi)
        if kind == "positive":
            lo = np.maximum(lo, -700.0)
            hi = np.minimum(hi, 700.0)
    lo = _support_edge(logf_t, lo, mode)
    hi = _support_edge(logf_t, hi, mode)
    return lo, hi


def _support_edge(logf_t, outer, inner, iters=60):
    """Move ``outer`` towards ``inner`` onto the edge of the finite support.

    Rows whose integrand is finite at ``outer`` are returned unchanged.
    """
    f = logf_t(outer[:, None])[:, 0]
    cut = ~np.isfinite(f)
    if not cut.any():
        return outer
    out_pt, in_pt = outer.copy(), inner.copy()
    for _ in range(iters):
        mid = 0.5 * (out_pt + in_pt)
        fm = logf_t(mid[:, None])[:, 0]
        ok = np.isfinite(fm)
        in_pt = np.where(cut & ok, mid, in_pt)
        out_pt = np.where(cut & ~ok, mid, out_pt)
    return np.where(cut, in_pt, outer)


def laplace_rule(logf_t, n_rows, n_points=201, quad_range_sd=12.0, kind="positive"):
    """Gauss-Legendre nodes ``t`` and weights on each row's Laplace window."""
    lo, hi = laplace_window(logf_t, n_rows, quad_range_sd, kind)
    return map_rule(lo, hi, n_points)
