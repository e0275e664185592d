import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cca_subspace.errors import (
    DegenerateGap,
    DimensionMismatch,
    InvalidModel,
    InvalidParams,
    InvalidShape,
    MatchedProductViolated,
    NonPositiveEntries,
    Singular,
)
from cca_subspace.population import CanonicalSpec, JointCovariance, build_joint
from cca_subspace.theory import (
    LowerBoundModel,
    RateParams,
    b_matrices,
    b_matrix_diagnostics,
    first_order_frobenius_loss,
    gaussian_kl,
    hadamard_audit,
    hadamard_bound_check,
    kl_audit,
    kl_closed_form,
    lower_bound_model,
    lower_rate,
    metric_identity_audit,
    sample_size_condition,
    standard_form_covariance,
    upper_rate,
    wedin_audit,
    wedin_check,
)


class TestRates:
    def test_upper_example(self):
        terms = upper_rate(RateParams(10, 10, 1000, 2, 0.9, 0.3))
        assert terms.principal == pytest.approx(0.19 * 0.91 / 0.36 * 0.01, rel=1e-14)
        assert terms.high_order == pytest.approx((20 / (1000 * 0.36)) ** 2)

    def test_zero_residual_correlation(self):
        params = RateParams(6, 8, 500, 1, 0.7, 0.0)
        expected = (1 - 0.49) / 0.49 * 6 / 500
        assert upper_rate(params).principal == pytest.approx(expected, rel=1e-14)

    def test_small_gap_identity(self):
        for gap in (1e-1, 1e-3, 1e-6):
            params = RateParams(7, 9, 300, 2, 1 - gap, 0.5)
            fac = (1 - params.lambda_k**2) * (1 - params.lambda_k1**2) / params.delta**2
            assert upper_rate(params).principal / fac == pytest.approx(7 / 300, rel=1e-12)

    def test_frobenius_dimension(self):
        params = RateParams(10, 12, 800, 3, 0.8, 0.4)
        ratio = upper_rate(params, "frobenius").principal / upper_rate(params).principal
        assert ratio == pytest.approx(7 / 10)
        with pytest.raises(InvalidParams):
            upper_rate(params, "nuclear")

    def test_monotonicity(self):
        base = dict(p1=10, p2=10, n=1000, k=2, lambda_k=0.8, lambda_k1=0.3)
        p0 = upper_rate(RateParams(**base)).principal
        assert upper_rate(RateParams(**{**base, "n": 2000})).principal < p0
        assert upper_rate(RateParams(**{**base, "p1": 11, "p2": 11})).principal > p0
        # larger gap with lambda_k fixed
        assert upper_rate(RateParams(**{**base, "lambda_k1": 0.1})).principal < p0

    def test_lower_saturation(self):
        assert lower_rate(RateParams(10, 10, 1, 2, 0.9, 0.8)) == 1.0
        assert lower_rate(RateParams(9, 9, 1, 8, 0.9, 0.8)) == pytest.approx(1 / 8)

    def test_lower_matches_upper_for_large_n(self):
        params = RateParams(10, 10, 10**7, 2, 0.9, 0.3)
        assert lower_rate(params) == pytest.approx(upper_rate(params, "frobenius").principal, rel=1e-14)

    def test_sample_size_condition(self):
        params = RateParams(10, 10, 1000, 2, 0.9, 0.3)
        lhs = 20 / (1000 * 0.36)
        rhs = 0.19 * 0.91 / 2
        assert sample_size_condition(params) == pytest.approx(lhs / rhs)
        half = RateParams(10, 10, 500, 2, 0.9, 0.3)
        assert sample_size_condition(half) == pytest.approx(2 * sample_size_condition(params))
        # equality case: choose n so the ratio is exactly one
        n_eq = lhs * 1000 / rhs
        assert sample_size_condition(RateParams(10, 10, n_eq, 2, 0.9, 0.3)) == pytest.approx(1.0)
        big = [sample_size_condition(RateParams(2, p2, 1000, 1, 0.9, 0.3)) for p2 in (10**4, 2 * 10**4)]
        # both sides carry p2 once for p2 >> p1, so the ratio is quadratic in p2
        assert big[1] / big[0] == pytest.approx(4.0, rel=1e-3)

    def test_condition_infinite_for_perfect_correlation(self):
        assert math.isinf(sample_size_condition(RateParams(4, 4, 100, 1, 1.0, 0.5)))

    def test_params_validation(self):
        with pytest.raises(InvalidParams):
            RateParams(4, 4, 100, 4, 0.9, 0.5)
        with pytest.raises(InvalidParams):
            RateParams(4, 4, 100, 1, 0.5, 0.5)
        with pytest.raises(InvalidParams):
            RateParams(4, 4, 0, 1, 0.9, 0.5)

    def test_from_spec(self):
        spec = CanonicalSpec(np.eye(3), np.eye(3), [0.9, 0.5, 0.1], np.eye(3), np.eye(3), 1)
        params = RateParams.from_spec(spec, 100)
        assert (params.lambda_k, params.lambda_k1, params.delta) == (0.9, 0.5, pytest.approx(0.4))

    def test_first_order_two_dim(self):
        # p1 = 2, k = 1: a single entry
        lj2, li2 = 0.81, 0.09
        expected = 2 * (1 - lj2) * (li2 + lj2 - 2 * li2 * lj2) / (lj2 - li2) ** 2 / 100
        assert first_order_frobenius_loss([0.9, 0.3], 1, 2, 100) == pytest.approx(expected)


def model_pair(**kw) -> LowerBoundModel:
    args = dict(p1=4, p2=5, k=2, lambda1=0.8, lambda2=0.2, seed=11)
    args.update(kw)
    return lower_bound_model(**args)


class TestKL:
    def test_identical_models(self):
        m = model_pair()
        same = LowerBoundModel(m.first, m.first, m.lambda1, m.lambda2, m.k)
        assert kl_closed_form(same, 100) == 0.0

    def test_zero_gap(self):
        m = model_pair(lambda1=0.5, lambda2=0.5)
        assert m.frame_difference() > 0.1
        assert kl_closed_form(m, 100) == 0.0
        assert gaussian_kl(build_joint(m.first), build_joint(m.second), 100) == pytest.approx(0.0, abs=1e-10)

    def test_cross_check_example(self):
        m = model_pair()
        assert m.product_gap() <= 1e-10
        closed = kl_closed_form(m, 37)
        generic = gaussian_kl(build_joint(m.first), build_joint(m.second), 37)
        assert closed > 0 and abs(closed - generic) <= 1e-8

    def test_general_covariances(self, rng):
        from conftest import random_pd

        m = model_pair(p1=3, p2=6, k=1, sigma_x=random_pd(rng, 3, 50.0), sigma_y=random_pd(rng, 6, 20.0), seed=5)
        closed = kl_closed_form(m, 10)
        assert abs(closed - gaussian_kl(build_joint(m.first), build_joint(m.second), 10)) <= 1e-8

    def test_linear_in_n(self):
        m = model_pair(seed=3)
        vals = [kl_closed_form(m, n) for n in (10, 20, 40)]
        assert vals[1] == pytest.approx(2 * vals[0], rel=1e-14)
        assert vals[2] == pytest.approx(4 * vals[0], rel=1e-14)
        gen = [gaussian_kl(build_joint(m.first), build_joint(m.second), n) for n in (10, 20, 40)]
        np.testing.assert_allclose(gen, vals, atol=1e-8)

    def test_quadratic_in_perturbation(self):
        out = []
        for scale in (1e-3, 2e-3, 4e-3):
            m = model_pair(scale=scale, seed=21)
            closed = kl_closed_form(m, 50)
            assert abs(closed - gaussian_kl(build_joint(m.first), build_joint(m.second), 50)) <= 1e-8
            out.append((math.sqrt(m.frame_difference()), closed))
        d = np.array(out)
        # exactly quadratic in the frame difference, roughly quadratic in the rotation scale
        np.testing.assert_allclose(d[:, 1] / d[:, 0] ** 2, d[0, 1] / d[0, 0] ** 2, rtol=1e-6)
        np.testing.assert_allclose(d[1:, 1] / d[:-1, 1], 4.0, rtol=1e-2)

    def test_matched_product_violated(self):
        m = model_pair()
        bad = CanonicalSpec(
            m.first.sigma_x, m.first.sigma_y, m.first.lambdas, m.first.frame_u, -m.first.frame_v, 2
        )
        with pytest.raises(MatchedProductViolated):
            kl_closed_form(LowerBoundModel(m.first, bad, 0.8, 0.2, 2), 10)

    def test_model_shape_errors(self):
        with pytest.raises(InvalidShape):
            lower_bound_model(4, 3, 2, 0.8, 0.2)
        with pytest.raises(InvalidParams):
            lower_bound_model(4, 5, 2, 1.0, 0.2)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_cross_check_property(self, seed):
        rep = kl_audit(1, seed=seed)
        assert rep.violations == 0


class TestGaussianKL:
    def test_equal(self, rng):
        from conftest import random_pd

        s = random_pd(rng, 5, 1e4)
        assert gaussian_kl(s, s, 3) == pytest.approx(0.0, abs=1e-10)

    def test_scalar(self):
        assert gaussian_kl([[2.0]], [[1.0]], 2) == pytest.approx(1 - math.log(2), rel=1e-14)

    def test_ill_conditioned(self):
        a = np.diag([1e8, 1.0])
        b = np.diag([1e8, 2.0])
        expected = 0.5 * (1.0 + 0.5 - 2 - math.log(0.5))
        assert gaussian_kl(a, b) == pytest.approx(expected, rel=1e-12)

    def test_errors(self):
        with pytest.raises(DimensionMismatch):
            gaussian_kl(np.eye(2), np.eye(3))
        with pytest.raises(Singular):
            gaussian_kl(np.diag([1.0, 0.0]), np.eye(2))

    def test_accepts_joint_covariance(self):
        cov = JointCovariance(np.eye(2), np.eye(2), 0.3 * np.eye(2))
        assert gaussian_kl(cov, cov.full) == pytest.approx(0.0, abs=1e-14)


class TestHadamard:
    def test_all_ones(self):
        rep = hadamard_bound_check(np.ones(4), np.ones(6), 200, seed=1)
        assert rep.reference_values["A1"]["max_ratio"] == pytest.approx(1.0, abs=1e-12)
        assert rep.violations == 0

    def test_cauchy_vectors(self):
        g = np.random.default_rng(2)
        alpha = np.concatenate([[0.1], g.uniform(0.1, 10.0, 19)])
        beta = np.concatenate([[0.1], g.uniform(0.1, 10.0, 14)])
        rep = hadamard_bound_check(alpha, beta, 10_000, seed=3)
        assert rep.violations == 0
        assert rep.reference_values["A1"]["max_ratio"] <= 1 + 1e-9
        assert rep.reference_values["A2"]["max_ratio"] <= 1 + 1e-9
        assert rep.reference_values["delta"] == 0.1

    def test_matrices(self):
        from cca_subspace.theory import hadamard_matrices

        mats = hadamard_matrices([1.0, 3.0], [1.0])
        np.testing.assert_allclose(mats["A1"], [[0.5], [0.25]])
        np.testing.assert_allclose(mats["A2"], [[0.5], [0.25]])
        np.testing.assert_allclose(mats["A3"], [[0.5], [0.75]])

    def test_corrupted_bound_fails(self):
        rep = hadamard_audit(1000, seed=4, bound_scale={"A2": 0.5})
        assert rep.violations > 0

    def test_audit_clean(self):
        rep = hadamard_audit(1000, seed=4)
        assert rep.violations == 0
        json.dumps(rep.to_dict())

    def test_non_positive(self):
        with pytest.raises(NonPositiveEntries):
            hadamard_bound_check([1.0, 0.0], [1.0], 1)
        with pytest.raises(NonPositiveEntries):
            hadamard_bound_check([], [1.0], 1)

    @settings(max_examples=20, deadline=None)
    @given(m=st.integers(1, 8), n=st.integers(1, 8), seed=st.integers(0, 2**32 - 1))
    def test_bounds_property(self, m, n, seed):
        g = np.random.default_rng(seed)
        rep = hadamard_bound_check(10.0 ** g.uniform(-1, 1, m), 10.0 ** g.uniform(-1, 1, n), 20, seed=g)
        assert rep.violations == 0


class TestWedin:
    def test_zero_perturbation(self, rng):
        a = rng.standard_normal((4, 3))
        res = wedin_check(a, np.zeros((4, 3)), 1)
        assert res.lhs == pytest.approx(0.0, abs=1e-12) and not res.violated

    def test_aligned_perturbation(self):
        res = wedin_check(np.diag([2.0, 1.0]), np.diag([0.0, 0.1]), 1)
        assert res.lhs == pytest.approx(0.0, abs=1e-15)
        assert res.bound == pytest.approx(0.2)
        assert not res.violated

    def test_degenerate(self):
        with pytest.raises(DegenerateGap):
            wedin_check(np.eye(2), np.zeros((2, 2)), 1)

    def test_errors(self):
        with pytest.raises(DimensionMismatch):
            wedin_check(np.eye(2), np.zeros((3, 2)), 1)
        with pytest.raises(InvalidParams):
            wedin_check(np.eye(2), np.zeros((2, 2)), 3)

    def test_audit(self):
        rep = wedin_audit(1000, seed=5)
        assert rep.violations == 0 and rep.max_ratio < 1


def test_metric_identity_audit():
    rep = metric_identity_audit(300, seed=6)
    assert rep.violations == 0


class TestBMatrices:
    def test_perfect_correlation_b1_zero(self):
        pop = standard_form_covariance([1.0, 0.5, 0.2], 3, 3)
        rep = b_matrix_diagnostics(pop, 50, 1, 5, seed=7)
        assert rep.mean_sq_fro["B1"] <= 1e-20
        assert rep.mean_sq_op["B1"] <= 1e-20

    def test_population_input_is_zero(self):
        pop = standard_form_covariance([0.9, 0.6, 0.2], 4, 5)
        mats = b_matrices(pop.sigma_x, pop.sigma_y, pop.sigma_xy, pop.sigma_xy, 2)
        for m in mats.values():
            assert np.max(np.abs(m)) <= 1e-15

    def test_not_standard_form(self):
        cov = JointCovariance(2 * np.eye(2), np.eye(2), 0.1 * np.eye(2))
        with pytest.raises(InvalidModel):
            b_matrix_diagnostics(cov, 10, 1, 3)
        increasing = JointCovariance(np.eye(2), np.eye(2), np.diag([0.2, 0.5]))
        with pytest.raises(InvalidModel):
            b_matrix_diagnostics(increasing, 10, 1, 3)

    def test_degenerate_gap(self):
        with pytest.raises(DegenerateGap):
            b_matrix_diagnostics(standard_form_covariance([0.5, 0.5], 3, 3), 10, 1, 3)

    def test_moments_match_analytic(self):
        pop = standard_form_covariance([0.9, 0.8, 0.3, 0.1], 6, 7)
        rep = b_matrix_diagnostics(pop, 500, 2, 400, seed=8)
        for key in ("B1", "B2", "B", "DinvB"):
            assert abs(rep.mean_sq_fro[key] - rep.analytic_sq_fro[key]) <= 4 * rep.se_sq_fro[key], key
        assert rep.mean_sq_fro["DinvB"] <= rep.reference["dinvb_fro_bound"]
        assert rep.analytic_sq_fro["B1"] == pytest.approx(4 * (0.19 + 0.36) / 500)
        json.dumps(rep.to_dict())
