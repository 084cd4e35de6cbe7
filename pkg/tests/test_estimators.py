import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hifisher.core.types import Domain, ParamPoint
from hifisher.errors import StepUnderflow, TooManyRejections
from hifisher.estimators import (
    EstimatorConfig,
    mc_expectation,
    nested_expectation,
    neg_hessian,
    numeric_conditional_fisher,
    summarize,
)
from hifisher.models import discrete_component, make_gaussian2, make_mixture, make_studentt
from hifisher.models.gaussian2 import precision_conditional_fisher
from hifisher.models.studentt import expected_conditional_fisher as studentt_ecf
from hifisher.specialfn import trigamma


def _normal(rng, n):
    return rng.standard_normal((n, 1))


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_outer": 99},
            {"n_inner": 0},
            {"seed": -1},
            {"fd_step": 1e-9},
            {"fd_step": 0.2},
            {"quad_points": 20},
            {"quad_points": 202},
            {"analytic": "some"},
            {"inner_method": "exact"},
        ],
    )
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            EstimatorConfig(**kwargs)

    def test_streams_are_disjoint(self):
        cfg = EstimatorConfig(seed=5)
        a = cfg.rng(1).random(4)
        b = cfg.rng(2).random(4)
        c = cfg.at(1).rng(1).random(4)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)
        assert np.array_equal(a, cfg.rng(1).random(4))

    def test_analytic_levels(self):
        assert EstimatorConfig(analytic="all").use_expected
        cfg = EstimatorConfig(analytic="per_draw")
        assert cfg.use_per_draw and not cfg.use_expected
        cfg = EstimatorConfig(analytic="none")
        assert not cfg.use_per_draw and not cfg.use_expected


class TestMcExpectation:
    def test_constant(self):
        c = np.array([[1.5, -2.0], [-2.0, 3.0]])
        est = mc_expectation(_normal, lambda x: np.broadcast_to(c, (len(x), 2, 2)), EstimatorConfig(n_outer=500))
        np.testing.assert_array_equal(est.mean, c)
        np.testing.assert_array_equal(est.stderr, 0.0)

    def test_clt_bound(self):
        est = mc_expectation(_normal, lambda x: x[:, 0], EstimatorConfig(n_outer=100_000, seed=11))
        assert abs(est.mean) <= 3 / math.sqrt(1e5)
        assert est.stderr == pytest.approx(1 / math.sqrt(1e5), rel=0.02)

    def test_gaussian2_expected_conditional(self):
        phi = 1.0

        def draw(rng, n):
            return rng.normal(0.0, math.sqrt((phi + 1) / phi), n)

        est = mc_expectation(draw, lambda y: precision_conditional_fisher(phi, y), EstimatorConfig(n_outer=100_000, seed=3))
        assert abs(est.mean - 0.375) <= 3 * est.stderr

    def test_deterministic(self):
        cfg = EstimatorConfig(n_outer=1000, seed=8)
        a = mc_expectation(_normal, lambda x: x**2, cfg)
        b = mc_expectation(_normal, lambda x: x**2, cfg)
        assert np.array_equal(a.mean, b.mean) and np.array_equal(a.stderr, b.stderr)


class TestSummarize:
    def test_rejections_counted(self):
        v = np.ones(1000)
        v[:5] = np.nan
        est = summarize(v)
        assert est.n_used == 995 and est.n_rejected == 5

    def test_too_many_rejections(self):
        v = np.ones(1000)
        v[:20] = np.inf
        with pytest.raises(TooManyRejections):
            summarize(v)

    @given(st.lists(st.floats(min_value=-1e6, max_value=1e6), min_size=2, max_size=50))
    def test_stderr_nonnegative(self, xs):
        est = summarize(np.array(xs))
        assert est.stderr >= 0
        assert est.mean == pytest.approx(np.mean(xs), abs=1e-6)


class TestNestedExpectation:
    def test_constant(self):
        model = make_studentt()
        est = nested_expectation(model, model.point(2.0), lambda y: np.full((len(y), 1, 1), 7.0), EstimatorConfig(n_outer=200))
        assert est.mean[0, 0] == 7.0 and est.stderr[0, 0] == 0.0

    def test_studentt_expected_conditional(self):
        model = make_studentt()
        theta = model.point(4.0)
        cfg = EstimatorConfig(n_outer=100_000, seed=21)
        est = nested_expectation(model, theta, lambda y: model.complete_conditional.fisher(y, theta.free), cfg)
        ref = 0.0297322961679158591  # mpmath at theta = 4
        assert studentt_ecf(4.0) == pytest.approx(ref, rel=1e-12)
        assert abs(est.mean[0, 0] - ref) <= 3 * est.stderr[0, 0]

    def test_discrete_mixture_mc_vs_exact(self):
        model = make_mixture([discrete_component([0.6, 0.4]), discrete_component([0.3, 0.7])])
        theta = model.point([0.5, 0.5])
        f = lambda y: model.complete_conditional.fisher(y, theta.free)
        exact = nested_expectation(model, theta, f, EstimatorConfig(n_outer=100))
        assert exact.stderr[0, 0] == 0.0
        mc = nested_expectation(model, theta, f, EstimatorConfig(n_outer=100_000, seed=2, exact_finite=False))
        assert abs(mc.mean[0, 0] - exact.mean[0, 0]) <= 3 * mc.stderr[0, 0]

    def test_nested_matches_direct_marginal(self):
        model = make_gaussian2()
        phi = 2.0
        theta = model.point(phi)
        cfg = EstimatorConfig(n_outer=50_000, seed=4)
        f = lambda y: model.complete_conditional.fisher(y, theta.free)
        nested = nested_expectation(model, theta, f, cfg)
        direct = mc_expectation(lambda rng, n: rng.normal(0, math.sqrt((phi + 1) / phi), (n, 1)), f, cfg, key=(77,))
        se = math.hypot(nested.stderr[0, 0], direct.stderr[0, 0])
        assert abs(nested.mean[0, 0] - direct.mean[0, 0]) <= 3 * se


class TestNumericConditionalFisher:
    def test_gamma_latent(self):
        from hifisher.models._common import gamma_logpdf

        theta = ParamPoint(np.array([4.0]))
        logdens = lambda x, t: gamma_logpdf(x[:, 0], t[0] / 2, t[0] / 2)
        sampler = lambda rng, n: rng.gamma(2.0, 0.5, (n, 1))
        fm = numeric_conditional_fisher(logdens, sampler, theta, EstimatorConfig(n_outer=1000))
        assert fm.scalar() == pytest.approx(0.25 * trigamma(2.0) - 1 / 8, rel=1e-4)

    def test_bernoulli(self):
        theta = ParamPoint(np.array([0.3]), Domain.interval(0, 1))
        logdens = lambda x, t: x[:, 0] * np.log(t[0]) + (1 - x[:, 0]) * np.log1p(-t[0])
        fm = numeric_conditional_fisher(logdens, None, theta, EstimatorConfig(), support=[0.0, 1.0])
        assert fm.scalar() == pytest.approx(1 / (0.3 * 0.7), rel=1e-8)

    def test_normal_precision(self):
        theta = ParamPoint(np.array([2.0]))
        logdens = lambda x, t: 0.5 * np.log(t[0]) - 0.5 * t[0] * x[:, 0] ** 2
        sampler = lambda rng, n: rng.normal(0, math.sqrt(0.5), (n, 1))
        fm = numeric_conditional_fisher(logdens, sampler, theta, EstimatorConfig(n_outer=500))
        assert fm.scalar() == pytest.approx(0.125, rel=1e-8)

    def test_bivariate_is_symmetric(self):
        # N(mu, 1/tau) in (mu, tau): Fisher diag(tau, 1/(2 tau^2))
        theta = ParamPoint(np.array([0.5, 2.0]), Domain(bounds=((-np.inf, np.inf), (0, np.inf))))
        logdens = lambda x, t: 0.5 * np.log(t[1]) - 0.5 * t[1] * (x[:, 0] - t[0]) ** 2
        sampler = lambda rng, n: rng.normal(0.5, math.sqrt(0.5), (n, 1))
        fm = numeric_conditional_fisher(logdens, sampler, theta, EstimatorConfig(n_outer=200_000, seed=1))
        assert np.allclose(fm.entries, fm.entries.T)
        np.testing.assert_allclose(np.diag(fm.entries), [2.0, 0.125], rtol=1e-6)
        assert abs(fm.entries[0, 1]) <= 3 * fm.se[0, 1] + 1e-9

    def test_step_underflow_at_boundary(self):
        theta = ParamPoint(np.array([1 - 1e-12, 1e-12]), Domain.open_simplex())
        logdens = lambda x, t: np.log(t[0]) * x[:, 0]
        with pytest.raises(StepUnderflow):
            numeric_conditional_fisher(logdens, None, theta, EstimatorConfig(), support=[1.0])

    @given(st.floats(min_value=0.05, max_value=50.0))
    def test_hessian_of_quadratic_is_exact(self, a):
        theta = ParamPoint(np.array([a]))
        x = np.zeros((3, 1))
        h = neg_hessian(lambda x, t: -1.5 * t[0] ** 2 * np.ones(len(x)), x, theta, EstimatorConfig())
        np.testing.assert_allclose(h[:, 0, 0], 3.0, rtol=1e-6)
