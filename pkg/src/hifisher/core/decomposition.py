"""Fisher information of hierarchical models without marginalizing.

For ``y | w, theta ~ f1`` and ``w | theta ~ f2`` the complete-data
information splits two ways::

    I_{y,w} = I_w + E_w[I_y(theta | w)] = I_y + E_y[I_w(theta | y)]

so the marginal information is ``I_y = I_w + E_w[I_y(.|w)] - E_y[I_w(.|y)]``.
Each term is taken from a closed form when the model registers one and is
otherwise estimated numerically (see :mod:`hifisher.estimators`).
"""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from ..errors import NonPositiveInformation
from ..estimators import (
    EstimatorConfig,
    conditional_fisher_rows,
    nested_expectation,
    summarize,
    top_level_fisher,
)
from .types import (
    ConditionalSpec,
    DecompositionReport,
    FisherMatrix,
    HierarchicalModel,
    ParamPoint,
    add_fisher,
    combine_methods,
    empty_given,
)

log = logging.getLogger(__name__)

# stream ids per Fisher component
_I_W, _E_IY, _E_IW, _MULTI = 1, 2, 3, 10
REFERENCE_RTOL = 1e-8
REFERENCE_SE_MULT = 5.0


def _as_point(model, theta):
    if isinstance(theta, ParamPoint):
        model.domain.validate(theta.values)
        return theta
    return model.point(theta)


def latent_fisher(model: HierarchicalModel, theta, cfg: EstimatorConfig) -> FisherMatrix:
    """I_w(theta), the information in the latent level f2(w | theta)."""
    theta = _as_point(model, theta)
    return top_level_fisher(model.level2, theta, cfg, key=(_I_W, 0))


def _expect_over_latent(model, theta, cfg, rows_of_w, key):
    """E_{w ~ f2}[rows_of_w(w)], exact for finite latent laws."""
    t = theta.free
    l2 = model.level2
    if cfg.exact_finite and l2.kind == "finite":
        ws = l2.support
        p = np.exp(l2.logpdf(ws, empty_given(len(ws)), t))
        keep = p > 0
        vals = rows_of_w(ws[keep])
        mean = np.tensordot(p[keep] / p[keep].sum(), vals, axes=1)
        return mean, np.zeros_like(mean), True
    rng = cfg.rng(*key, 0)
    w = l2.draw(rng, empty_given(cfg.n_outer), t)
    est = summarize(rows_of_w(w), context=f" at theta={theta.values.tolist()}")
    return est.mean, est.stderr, False


def expected_level1_fisher(model: HierarchicalModel, theta, cfg: EstimatorConfig, force_general=False) -> FisherMatrix:
    """E_w[I_y(theta | w)]; identically zero when level 1 is theta-free.

    ``force_general`` bypasses the theta-free shortcut and runs the
    numeric path on level 1 regardless of its flag.
    """
    theta = _as_point(model, theta)
    d = theta.dim
    l1 = model.level1
    if not l1.depends_on_theta and not force_general:
        return FisherMatrix(np.zeros((d, d)), np.zeros((d, d)), "analytic", ("theta_free_fast_path",))
    if cfg.use_expected and model.expected_level1_fisher is not None and l1.depends_on_theta:
        return FisherMatrix(np.asarray(model.expected_level1_fisher(theta.free)).reshape(d, d), None, "analytic")
    spec = l1
    if force_general and not l1.depends_on_theta:
        spec = _forced(l1)
    inner_rng = cfg.rng(_E_IY, 1)
    mean, se, exact = _expect_over_latent(
        model, theta, cfg, lambda w: conditional_fisher_rows(spec, w, theta, cfg, rng=inner_rng), (_E_IY,)
    )
    per_draw = spec.fisher is not None and cfg.use_per_draw
    method = ("analytic" if per_draw else "finite_difference") if exact else "monte_carlo"
    return FisherMatrix(mean, se, method)


def _forced(spec: ConditionalSpec) -> ConditionalSpec:
    return ConditionalSpec(
        spec.name, spec.dim, spec.logpdf, spec.sample, True, spec.fisher if spec.depends_on_theta else None,
        spec.kind, spec.support,
    )


def complete_fisher(model: HierarchicalModel, theta, cfg: EstimatorConfig, force_general=False) -> FisherMatrix:
    """I_{y,w}(theta) = I_w(theta) + E_w[I_y(theta | w)]."""
    theta = _as_point(model, theta)
    return add_fisher(latent_fisher(model, theta, cfg), expected_level1_fisher(model, theta, cfg, force_general))


def expected_conditional_latent_fisher(model: HierarchicalModel, theta, cfg: EstimatorConfig) -> FisherMatrix:
    """E_y[I_w(theta | y)] via w ~ f2, y ~ f1(.|w), then I_w(theta | y)."""
    theta = _as_point(model, theta)
    d = theta.dim
    if cfg.use_expected and model.expected_conditional_fisher is not None:
        return FisherMatrix(np.asarray(model.expected_conditional_fisher(theta.free)).reshape(d, d), None, "analytic")
    spec = model.complete_conditional
    inner_rng = cfg.rng(_E_IW, 1)
    est = nested_expectation(
        model, theta, lambda y: conditional_fisher_rows(spec, y, theta, cfg, rng=inner_rng), cfg, key=(_E_IW, 0)
    )
    exact = cfg.exact_finite and model.level1.kind == "finite" and model.level2.kind == "finite"
    per_draw = spec.fisher is not None and cfg.use_per_draw
    method = ("analytic" if per_draw else "finite_difference") if exact else "monte_carlo"
    return est.to_fisher(method)


def subtract_with_repair(total: FisherMatrix, part: FisherMatrix, theta=None):
    """``total - part`` repaired to PSD.

    Eigenvalues in ``[-3 SE, 0)`` are zeroed (flag ``psd_clamped``); anything
    lower raises :class:`NonPositiveInformation`.

    Returns
    -------
    (FisherMatrix, float)
        The repaired difference and the smallest raw eigenvalue.
    """
    raw = total.entries - part.entries
    se = np.sqrt(total.se**2 + part.se**2)
    eigval, eigvec = np.linalg.eigh(0.5 * (raw + raw.T))
    scale = max(np.max(np.abs(total.entries)), np.max(np.abs(part.entries)), 1e-300)
    noise = 3.0 * float(np.linalg.norm(se, 2))
    floor = 1e-12 * scale
    flags = []
    if eigval.min() < -(noise + floor):
        where = "" if theta is None else f" at theta={theta.values.tolist()}"
        raise NonPositiveInformation(
            f"marginal information has eigenvalue {eigval.min():.6g} below -3*SE={-noise:.3g}{where}",
            eigenvalue=float(eigval.min()),
            tolerance=noise,
            theta=None if theta is None else theta.values.tolist(),
        )
    out = raw
    if eigval.min() < 0:
        if eigval.min() < -floor:
            flags.append("psd_clamped")
            log.warning("clamped negative eigenvalue %.3g of marginal information to 0", eigval.min())
        out = (eigvec * np.maximum(eigval, 0.0)) @ eigvec.T
    method = combine_methods(total.method, part.method)
    return FisherMatrix(out, se, method, tuple(flags)), float(eigval.min())


def marginal_fisher(model: HierarchicalModel, theta, cfg: EstimatorConfig, force_general=False) -> FisherMatrix:
    """I_y(theta) = I_w + E_w[I_y(theta|w)] - E_y[I_w(theta|y)].

    With a theta-free level 1 the middle term is skipped and the result is
    ``I_w - E_y[I_w(theta|y)]`` (flag ``theta_free_fast_path``).
    """
    theta = _as_point(model, theta)
    ic = complete_fisher(model, theta, cfg, force_general)
    e = expected_conditional_latent_fisher(model, theta, cfg)
    out, _ = subtract_with_repair(ic, e, theta)
    fast = not model.level1.depends_on_theta and not force_general
    return out.with_flags("theta_free_fast_path") if fast else out


def decompose_two_level(model: HierarchicalModel, theta, cfg: EstimatorConfig) -> DecompositionReport:
    """All five Fisher components at ``theta`` with identity residuals.

    Violations are recorded in the report, never dropped: identity
    residuals beyond 3 SE, or a registered closed-form ``I_y`` missed by
    more than 5 SE plus 1e-8 relative (``reference_z`` holds the score).
    """
    theta = _as_point(model, theta)
    i_w = latent_fisher(model, theta, cfg)
    e_iy = expected_level1_fisher(model, theta, cfg)
    i_c = add_fisher(i_w, e_iy)
    e_iw = expected_conditional_latent_fisher(model, theta, cfg)
    i_y, min_eig = subtract_with_repair(i_c, e_iw, theta)
    fast = not model.level1.depends_on_theta
    if fast:
        i_y = i_y.with_flags("theta_free_fast_path")

    se_c = np.sqrt(i_w.se**2 + e_iy.se**2)
    se_m = np.sqrt(i_c.se**2 + e_iw.se**2)
    scale = max(float(np.max(np.abs(i_c.entries))), 1e-300)
    residuals = {
        "complete_split": float(np.max(np.abs(i_c.entries - i_w.entries - e_iy.entries))),
        "marginal_split": float(np.max(np.abs(i_c.entries - e_iw.entries - i_y.entries))),
        "marginal_min_eigenvalue": min_eig,
    }
    violations = []
    if residuals["complete_split"] > 3 * np.max(se_c) + 1e-12 * scale:
        violations.append("complete_split")
    if residuals["marginal_split"] > 3 * np.max(se_m) + 1e-12 * scale:
        violations.append("marginal_split")
    ref = None
    if model.reference_marginal_fisher is not None:
        ref_entries = np.asarray(model.reference_marginal_fisher(theta.free), dtype=float).reshape(theta.dim, theta.dim)
        ref = FisherMatrix(ref_entries, None, "analytic")
        diff = np.abs(i_y.entries - ref_entries)
        residuals["reference"] = float(np.max(diff))
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se_m > 0, diff / se_m, np.where(diff > 0, np.inf, 0.0))
        residuals["reference_z"] = float(np.max(z))
        # 5 SE keeps the family-wise false alarm rate small over long grids
        tol = REFERENCE_SE_MULT * se_m + REFERENCE_RTOL * np.maximum(np.abs(ref_entries), 1e-300) + 1e-14 * scale
        if np.any(diff > tol):
            violations.append("reference")
    return DecompositionReport(
        theta=theta,
        i_w=i_w,
        e_iw_given_y=e_iw,
        e_iy_given_w=e_iy,
        i_complete=i_c,
        i_marginal=i_y,
        estimator_config_echo=cfg,
        fast_path=fast,
        residuals=residuals,
        violations=tuple(violations),
        reference=ref,
    )


def decompose_multilevel(levels: Sequence[ConditionalSpec], theta: ParamPoint, cfg: EstimatorConfig) -> FisherMatrix:
    """Complete-data information of a chain ``w1 | theta, w2 | w1, ..., y | w``.

    ``levels[0]`` is the top latent law and ``levels[-1]`` the observation
    law; each level conditions on every earlier level.  Returns
    ``I_{w1} + sum_t E[I_{w_t}(theta | w_1..w_{t-1})] + E_w[I_y(theta | w)]``.
    """
    if len(levels) < 2:
        raise ValueError("a hierarchy needs at least two levels")
    t = theta.free
    total = top_level_fisher(levels[0], theta, cfg, key=(_MULTI, 0))
    for k in range(1, len(levels)):
        spec = levels[k]
        if not spec.depends_on_theta:
            continue
        rng = cfg.rng(_MULTI + k, 0)
        given = empty_given(cfg.n_outer)
        for anc in levels[:k]:
            given = np.hstack([given, anc.draw(rng, given, t)])
        rows = conditional_fisher_rows(spec, given, theta, cfg, rng=cfg.rng(_MULTI + k, 1))
        est = summarize(rows, context=f" at level {k}")
        analytic = spec.fisher is not None and cfg.use_per_draw and np.all(est.stderr == 0)
        term = FisherMatrix(est.mean, est.stderr, "analytic" if analytic else "monte_carlo")
        total = add_fisher(total, term)
    return total
