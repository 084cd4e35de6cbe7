import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hifisher.core import FisherMatrix, decompose_two_level
from hifisher.estimators import EstimatorConfig
from hifisher.models import discrete_component, get_model, make_gaussian2, make_lasso, make_mixture, make_studentt
from hifisher.models import hyperbolic
from hifisher.priors import (
    PriorGrid,
    barycentric_grid,
    corollary_properness_check,
    jeffreys_grid,
    make_grid,
    minkowski_check,
    parse_grid,
    prior_table,
    properness_diagnostic,
    upper_bound_prior,
)

CFG = EstimatorConfig(n_outer=2000, seed=1)


def _synthetic(x, pi, bounds):
    x = np.asarray(x, dtype=float)
    z = np.zeros_like(x)
    return PriorGrid((), x[:, None], (), np.asarray(pi, dtype=float), np.asarray(pi, dtype=float), z, z, bounds)


class TestGrids:
    def test_parse_log(self):
        g = parse_grid("0.1:10:5:log")
        np.testing.assert_allclose(g, [0.1, 10**-0.5, 1.0, 10**0.5, 10.0])

    def test_parse_linear(self):
        np.testing.assert_allclose(parse_grid("0:1:3"), [0.0, 0.5, 1.0])

    @pytest.mark.parametrize("text", ["1:0:5", "0:1:1", "0:1", "a:1:3", "0:1:3:cubic", "0:1:3:log"])
    def test_parse_rejects(self, text):
        with pytest.raises(ValueError):
            parse_grid(text)

    def test_make_grid_increasing(self):
        g = make_grid(0.2, 20, 50, log=True)
        assert np.all(np.diff(g) > 0)

    def test_barycentric_count(self):
        pts = barycentric_grid(3, 11)
        assert pts.shape == (45, 3)
        assert np.all(pts > 0)
        np.testing.assert_allclose(pts.sum(axis=1), 1.0, atol=1e-15)
        assert len({tuple(np.round(p, 12)) for p in pts}) == 45

    @given(st.integers(2, 4), st.integers(4, 12))
    def test_barycentric_binomial(self, k, depth):
        if depth < k:
            return
        assert len(barycentric_grid(k, depth)) == math.comb(depth - 1, k - 1)


class TestJeffreys:
    def test_lasso_ratio(self):
        g = jeffreys_grid(make_lasso(p=2), [1.0, 2.0], CFG)
        assert g.jeffreys[0] / g.jeffreys[1] == pytest.approx(2.0, rel=1e-14)
        assert g.jeffreys[0] == pytest.approx(math.sqrt(2.0), rel=1e-14)

    def test_gaussian2_ratio(self):
        g = jeffreys_grid(make_gaussian2(), [1.0, 3.0], CFG)
        assert g.jeffreys[0] / g.jeffreys[1] == pytest.approx(6.0, rel=1e-13)

    def test_disjoint_mixture(self):
        m = make_mixture([discrete_component([0.5, 0.5, 0.0]), discrete_component([0.0, 0.0, 1.0])])
        t = np.linspace(0.05, 0.95, 19)
        g = jeffreys_grid(m, t, CFG)
        np.testing.assert_allclose(g.jeffreys, 1 / np.sqrt(t * (1 - t)), rtol=1e-12)

    def test_nonnegative_and_dominated_everywhere(self):
        for name, grid in [("gaussian2", np.geomspace(0.1, 10, 20)), ("studentt", np.geomspace(0.2, 50, 20)),
                           ("hyperbolic", np.geomspace(0.2, 20, 20)), ("mixture", np.linspace(0.02, 0.98, 20))]:
            g = jeffreys_grid(get_model(name), grid, CFG)
            assert np.all(g.jeffreys >= 0)
            assert np.all(g.dominance_slack() >= 0), name

    def test_studentt_dominance_closed_forms(self):
        t = np.array([0.5, 1, 2, 5, 10, 50])
        g = jeffreys_grid(make_studentt(), t, CFG)
        assert np.all(g.jeffreys <= g.upper_bound)

    def test_workers_do_not_change_results(self):
        m = make_studentt()
        cfg = EstimatorConfig(n_outer=2000, seed=4, analytic="per_draw")
        t = np.geomspace(0.5, 20, 12)
        a = jeffreys_grid(m, t, cfg, workers=1)
        b = jeffreys_grid(m, t, cfg, workers=4)
        assert np.array_equal(a.jeffreys, b.jeffreys) and np.array_equal(a.stderr, b.stderr)

    def test_reparametrization_invariance(self):
        tau = np.geomspace(0.1, 10, 25)
        var = jeffreys_grid(make_gaussian2(parametrization="variance"), tau, CFG).jeffreys
        prec = jeffreys_grid(make_gaussian2(), (1 / tau)[::-1], CFG).jeffreys[::-1]
        np.testing.assert_allclose(var, prec / tau**2, rtol=1e-6)

    def test_stderr_shrinks_like_root_two(self):
        m = make_studentt()
        t = np.geomspace(0.5, 20, 15)
        se1 = jeffreys_grid(m, t, EstimatorConfig(n_outer=20_000, seed=3, analytic="per_draw")).stderr
        se2 = jeffreys_grid(m, t, EstimatorConfig(n_outer=40_000, seed=3, analytic="per_draw")).stderr
        ratio = np.median(se1) / np.median(se2)
        assert 1.2 <= ratio <= 1.7

    def test_table_columns(self):
        g = jeffreys_grid(make_gaussian2(), [0.5, 1.0], CFG)
        rows = prior_table(g)
        assert list(rows[0]) == ["theta", "i_w", "e_iw_given_y", "e_iy_given_w", "i_y", "jeffreys", "upper_bound",
                                 "stderr_jeffreys"]
        assert rows[1]["i_y"] == pytest.approx(0.125)


class TestUpperBound:
    def test_studentt(self):
        ub, se = upper_bound_prior(make_studentt(), [2.0], CFG)
        assert ub[0] == pytest.approx(0.401538935487029214, rel=1e-12)
        assert se[0] == 0.0

    def test_hyperbolic(self):
        t = np.geomspace(0.2, 20, 10)
        ub, _ = upper_bound_prior(get_model("hyperbolic"), t, CFG)
        np.testing.assert_allclose(ub, np.sqrt(hyperbolic.complete_upper_bound(t)), rtol=1e-13)

    def test_mixture(self):
        t = np.linspace(0.1, 0.9, 9)
        ub, _ = upper_bound_prior(make_mixture(), t, CFG)
        np.testing.assert_allclose(ub, 1 / np.sqrt(t * (1 - t)), rtol=1e-13)

    def test_mixture_normalization(self):
        g = jeffreys_grid(make_mixture(), np.linspace(0.0005, 0.9995, 401), CFG)
        rep = properness_diagnostic(g, column="upper_bound")
        assert rep.verdict == "proper"
        assert rep.normalization == pytest.approx(math.pi, rel=0.02)


def _random_psd(rng, n):
    a = rng.standard_normal((n, n))
    return FisherMatrix(a @ a.T + 1e-3 * np.eye(n))


class TestMinkowski:
    def test_identity_equality(self):
        eye = FisherMatrix(np.eye(2))
        r = minkowski_check(eye, eye)
        assert r.lhs_half == 2.0 and r.rhs_half == 2.0 and r.holds_half and r.holds_root_n

    def test_diagonal_example(self):
        r = minkowski_check(FisherMatrix(np.diag([4.0, 1.0])), FisherMatrix(np.diag([1.0, 4.0])))
        assert r.lhs_half == pytest.approx(5.0) and r.rhs_half == pytest.approx(4.0)

    def test_dimension_one_rejected(self):
        with pytest.raises(ValueError):
            minkowski_check(FisherMatrix(np.eye(1)), FisherMatrix(np.eye(1)))

    def test_mismatch_rejected(self):
        with pytest.raises(ValueError):
            minkowski_check(FisherMatrix(np.eye(2)), FisherMatrix(np.eye(3)))

    @given(st.integers(0, 2**32 - 1), st.integers(2, 5))
    def test_random_psd_pairs(self, seed, n):
        rng = np.random.default_rng(seed)
        r = minkowski_check(_random_psd(rng, n), _random_psd(rng, n))
        assert r.holds_root_n
        if n == 2:
            assert r.holds_half

    def test_mixture_p2(self):
        m = make_mixture([discrete_component([0.5, 0.3, 0.2]), discrete_component([0.2, 0.2, 0.6]),
                          discrete_component([0.1, 0.6, 0.3])])
        r = decompose_two_level(m, np.full(3, 1 / 3), CFG)
        rep = minkowski_check(r.i_marginal, r.e_iw_given_y)
        assert rep.holds_half and rep.holds_root_n
        assert rep.lhs_half == pytest.approx(math.sqrt(r.i_complete.det()), rel=1e-12)


class TestProperness:
    def test_studentt_tails(self):
        g = jeffreys_grid(make_studentt(), parse_grid("0.5:100:200:log"), CFG)
        upper, lower = g.properness.tail("upper"), g.properness.tail("lower")
        assert upper.status == "integrable"
        assert abs(upper.exponent + 2) <= 0.3
        # I_y * theta^2 tends to a constant at 0, so pi ~ 1/theta there
        assert lower.status == "divergent"

    def test_lasso_improper(self):
        g = jeffreys_grid(make_lasso(p=1), parse_grid("0.01:100:200:log"), CFG)
        assert g.verdict == "improper"
        for which in ("lower", "upper"):
            assert g.properness.tail(which).exponent == pytest.approx(-1.0, abs=1e-9)

    def test_synthetic_proper(self):
        x = np.geomspace(1e-4, 1e4, 400)
        rep = properness_diagnostic(_synthetic(x, 1 / (1 + x) ** 2, (0.0, math.inf)))
        assert rep.verdict == "proper"
        assert rep.normalization == pytest.approx(1.0, rel=1e-3)

    @given(st.floats(min_value=-3.0, max_value=-1.2))
    def test_power_law_upper_tail(self, a):
        x = np.geomspace(1.0, 1e3, 100)
        rep = properness_diagnostic(_synthetic(x, x**a, (0.0, math.inf)))
        assert rep.tail("upper").status == "integrable"
        assert rep.tail("upper").exponent == pytest.approx(a, abs=1e-9)

    @given(st.floats(min_value=-1.0, max_value=0.5))
    def test_heavy_upper_tail_divergent(self, a):
        x = np.geomspace(1.0, 1e3, 100)
        rep = properness_diagnostic(_synthetic(x, x**a, (0.0, math.inf)))
        assert rep.tail("upper").status == "divergent"
        assert rep.verdict == "improper"

    def test_noisy_tail_inconclusive(self, rng):
        x = np.geomspace(1.0, 1e3, 64)
        pi = x**-2.0 * np.exp(rng.normal(0, 3.0, x.size))
        rep = properness_diagnostic(_synthetic(x, pi, (0.0, math.inf)))
        assert rep.tail("upper").status == "undetermined"
        assert rep.verdict in ("inconclusive", "improper")

    def test_rejects_bad_window(self):
        x = np.geomspace(1.0, 1e3, 64)
        with pytest.raises(ValueError):
            properness_diagnostic(_synthetic(x, x**-2, (0.0, math.inf)), tail_window=0.9)


class TestLatentDominance:
    @pytest.mark.parametrize("name,grid", [("gaussian2", np.geomspace(0.1, 10, 20)),
                                           ("studentt", np.geomspace(0.5, 50, 20)),
                                           ("mixture", np.linspace(0.02, 0.98, 20))])
    def test_dominated(self, name, grid):
        rep = corollary_properness_check(get_model(name), grid, CFG)
        assert rep.dominated and not rep.violations

    def test_rejects_theta_dependent_level1(self):
        with pytest.raises(ValueError):
            corollary_properness_check(get_model("hyperbolic"), [1.0, 2.0], CFG)
