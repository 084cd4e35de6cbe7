import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hifisher.core import (
    Domain,
    FisherMatrix,
    ParamPoint,
    add_fisher,
    complete_fisher,
    decompose_multilevel,
    decompose_two_level,
    expected_conditional_latent_fisher,
    expected_level1_fisher,
    marginal_fisher,
    subtract_with_repair,
)
from hifisher.errors import DomainError, NonPositiveInformation
from hifisher.estimators import EstimatorConfig
from hifisher.models import (
    discrete_component,
    get_model,
    lasso_chain,
    make_gaussian2,
    make_lasso,
    make_mixture,
    make_studentt,
)

CFG = EstimatorConfig(n_outer=2000, seed=1)
STUDENTT_ECF_2 = 0.100367216802836494  # mpmath
STUDENTT_IY_2 = 0.0608662999092201150  # mpmath


class TestParamPoint:
    @pytest.mark.parametrize("values", [[0.0], [-1.0], [np.inf], [np.nan]])
    def test_positive_rejects(self, values):
        with pytest.raises(DomainError):
            ParamPoint(np.array(values))

    @pytest.mark.parametrize("values", [[0.5, 0.6], [0.0, 1.0], [1.0]])
    def test_simplex_rejects(self, values):
        with pytest.raises(DomainError):
            ParamPoint(np.array(values), Domain.open_simplex())

    def test_simplex_free_coordinates(self):
        p = ParamPoint(np.array([0.2, 0.3, 0.5]), Domain.open_simplex())
        np.testing.assert_array_equal(p.free, [0.3, 0.5])
        assert p.dim == 2
        np.testing.assert_allclose(p.with_free([0.1, 0.1]).values, [0.8, 0.1, 0.1])

    def test_immutable(self):
        p = ParamPoint(np.array([1.0]))
        with pytest.raises(ValueError):
            p.values[0] = 2.0


class TestFisherMatrix:
    def test_symmetrized(self):
        f = FisherMatrix(np.array([[2.0, 1.0], [1.0 + 1e-12, 3.0]]))
        np.testing.assert_array_equal(f.entries, f.entries.T)

    def test_hard_negative_rejected(self):
        with pytest.raises(NonPositiveInformation):
            FisherMatrix(np.array([[1.0, 0.0], [0.0, -0.1]]))

    def test_negative_within_noise_accepted(self):
        f = FisherMatrix(np.array([[-0.01]]), np.array([[0.01]]), "monte_carlo")
        assert f.scalar() == -0.01

    def test_add_propagates_rss(self):
        a = FisherMatrix(np.array([[1.0]]), np.array([[0.3]]), "monte_carlo")
        b = FisherMatrix(np.array([[2.0]]), np.array([[0.4]]), "analytic")
        s = add_fisher(a, b)
        assert s.scalar() == 3.0 and s.se[0, 0] == pytest.approx(0.5)
        assert s.method == "monte_carlo"

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            FisherMatrix(np.eye(1), method="guess")

    def test_det_stderr_first_order(self):
        f = FisherMatrix(np.diag([2.0, 3.0]), np.diag([0.1, 0.2]), "monte_carlo")
        # d det / d a11 = 3, d det / d a22 = 2
        assert f.det_stderr() == pytest.approx(np.hypot(0.3, 0.4))


class TestSubtractWithRepair:
    def test_clamps_small_negative(self):
        total = FisherMatrix(np.array([[1.0]]), np.array([[0.1]]), "monte_carlo")
        part = FisherMatrix(np.array([[1.05]]), None, "analytic")
        out, min_eig = subtract_with_repair(total, part)
        assert out.scalar() == 0.0
        assert "psd_clamped" in out.flags
        assert min_eig == pytest.approx(-0.05)

    def test_raises_below_three_se(self):
        total = FisherMatrix(np.array([[0.1]]), np.array([[0.01]]), "monte_carlo")
        part = FisherMatrix(np.array([[1.0]]), None, "analytic")
        with pytest.raises(NonPositiveInformation):
            subtract_with_repair(total, part)


class TestComponents:
    def test_gaussian2_complete(self):
        m = make_gaussian2()
        f = complete_fisher(m, 1.0, CFG)
        assert f.scalar() == 0.5 and f.method == "analytic"

    def test_lasso_complete(self):
        assert complete_fisher(make_lasso(p=3), 2.0, CFG).scalar() == pytest.approx(1.5, rel=1e-15)

    def test_mixture_shape(self):
        m = make_mixture([discrete_component([0.5, 0.3, 0.2]), discrete_component([0.2, 0.2, 0.6]),
                          discrete_component([0.1, 0.6, 0.3])])
        f = complete_fisher(m, [0.2, 0.3, 0.5], CFG)
        assert f.entries.shape == (2, 2)
        np.testing.assert_array_equal(f.entries, f.entries.T)

    @pytest.mark.parametrize(
        "model,theta,expected",
        [
            (make_gaussian2(), 1.0, 0.375),
            (make_lasso(p=3), 2.0, 0.75),
            (make_studentt(), 2.0, STUDENTT_ECF_2),
        ],
    )
    def test_expected_conditional(self, model, theta, expected):
        assert expected_conditional_latent_fisher(model, theta, CFG).scalar() == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize(
        "model,theta,expected",
        [
            (make_gaussian2(), 1.0, 0.125),
            (make_gaussian2(), 3.0, 1 / (2 * 9 * 16)),
            (make_lasso(p=3), 2.0, 0.75),
            (make_studentt(), 2.0, STUDENTT_IY_2),
        ],
    )
    def test_marginal(self, model, theta, expected):
        assert marginal_fisher(model, theta, CFG).scalar() == pytest.approx(expected, rel=1e-12)

    def test_studentt_expected_conditional_mc(self):
        cfg = EstimatorConfig(n_outer=50_000, seed=9, analytic="per_draw")
        f = expected_conditional_latent_fisher(make_studentt(), 2.0, cfg)
        assert f.method == "monte_carlo"
        assert abs(f.scalar() - STUDENTT_ECF_2) <= 3 * f.se[0, 0]

    def test_domain_error(self):
        with pytest.raises(DomainError):
            marginal_fisher(make_studentt(), 0.0, CFG)


class TestFastPath:
    @pytest.mark.parametrize("name,theta", [("gaussian2", 0.7), ("lasso", 1.3), ("studentt", 4.0)])
    def test_forced_general_matches(self, name, theta):
        m = get_model(name)
        fast = marginal_fisher(m, theta, CFG)
        slow = marginal_fisher(m, theta, CFG, force_general=True)
        assert "theta_free_fast_path" in fast.flags
        assert "theta_free_fast_path" not in slow.flags
        assert abs(fast.scalar() - slow.scalar()) <= 1e-12 * abs(fast.scalar())

    def test_forced_level1_term_is_zero(self):
        m = make_gaussian2()
        f = expected_level1_fisher(m, 1.0, EstimatorConfig(n_outer=500, analytic="none"), force_general=True)
        assert f.scalar() == 0.0


class TestDecomposeTwoLevel:
    def test_gaussian2_components(self):
        r = decompose_two_level(make_gaussian2(), 1.0, CFG)
        got = [r.i_w.scalar(), r.e_iw_given_y.scalar(), r.e_iy_given_w.scalar(), r.i_complete.scalar(),
               r.i_marginal.scalar()]
        np.testing.assert_allclose(got, [0.5, 0.375, 0.0, 0.5, 0.125], rtol=1e-15)
        assert r.ok and r.fast_path

    def test_disjoint_bernoulli_mixture(self):
        m = make_mixture([discrete_component([0.5, 0.5, 0.0, 0.0]), discrete_component([0.0, 0.0, 0.5, 0.5])])
        r = decompose_two_level(m, [0.5, 0.5], CFG)
        assert r.i_marginal.scalar() == pytest.approx(4.0, rel=1e-13)
        assert r.e_iw_given_y.scalar() == 0.0

    @pytest.mark.parametrize(
        "name,theta,params",
        [
            ("gaussian2", 0.5, {}),
            ("studentt", 3.0, {}),
            ("lasso", 1.5, {"p": 2}),
            ("hyperbolic", 1.0, {}),
            ("mixture", [0.4, 0.6], {}),
        ],
    )
    def test_identity_on_mc_path(self, name, theta, params):
        m = get_model(name, **params)
        r = decompose_two_level(m, theta, EstimatorConfig(n_outer=20_000, seed=5, analytic="per_draw"))
        assert "complete_split" not in r.violations and "marginal_split" not in r.violations
        lhs = r.i_w.entries + r.e_iy_given_w.entries
        rhs = r.i_marginal.entries + r.e_iw_given_y.entries
        se = np.sqrt(r.i_complete.se**2 + r.e_iw_given_y.se**2)
        assert np.all(np.abs(lhs - rhs) <= 3 * se + 1e-12 * np.abs(lhs))

    def test_deterministic(self):
        m = make_studentt()
        cfg = EstimatorConfig(n_outer=3000, seed=12, analytic="none")
        a = decompose_two_level(m, 2.5, cfg).to_dict()
        b = decompose_two_level(m, 2.5, cfg).to_dict()
        assert a == b

    def test_seed_changes_mc_result(self):
        m = make_studentt()
        a = decompose_two_level(m, 2.5, EstimatorConfig(n_outer=3000, seed=1, analytic="per_draw"))
        b = decompose_two_level(m, 2.5, EstimatorConfig(n_outer=3000, seed=2, analytic="per_draw"))
        assert a.e_iw_given_y.scalar() != b.e_iw_given_y.scalar()


class TestMultilevel:
    def test_lasso_grouping_invariance(self):
        theta = ParamPoint(np.array([1.0]))
        cfg = EstimatorConfig(n_outer=20_000, seed=3, analytic="none")
        three = decompose_multilevel(lasso_chain(p=1), theta, cfg)
        two = complete_fisher(make_lasso(p=1), theta, cfg)
        assert three.scalar() == pytest.approx(2.0, rel=1e-6)
        assert abs(three.scalar() - two.scalar()) <= 3 * np.hypot(three.se[0, 0], two.se[0, 0]) + 1e-9

    @given(st.floats(min_value=0.1, max_value=20.0))
    def test_two_level_chain_is_complete_fisher(self, phi):
        m = make_gaussian2()
        theta = m.point(phi)
        chain = decompose_multilevel([m.level2, m.level1], theta, CFG)
        assert chain.scalar() == pytest.approx(complete_fisher(m, theta, CFG).scalar(), rel=1e-14)

    def test_theta_free_upper_levels(self):
        theta = ParamPoint(np.array([2.5]))
        levels = lasso_chain(p=3)
        assert decompose_multilevel(levels, theta, CFG).scalar() == pytest.approx(2 * 3 / 2.5**2, rel=1e-15)

    def test_needs_two_levels(self):
        with pytest.raises(ValueError):
            decompose_multilevel(lasso_chain()[:1], ParamPoint(np.array([1.0])), CFG)

    def test_hyperbolic_chain_includes_level1(self):
        m = get_model("hyperbolic")
        theta = m.point(1.5)
        cfg = EstimatorConfig(n_outer=50_000, seed=6)
        chain = decompose_multilevel([m.level2, m.level1], theta, cfg)
        ref = complete_fisher(m, theta, cfg)
        assert abs(chain.scalar() - ref.scalar()) <= 3 * np.hypot(chain.se[0, 0], ref.se[0, 0])
