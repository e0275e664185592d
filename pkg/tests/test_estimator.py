import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cca_subspace.errors import DimensionMismatch, NotPsd, RankTooLarge, Singular, TooFewSamples
from cca_subspace.estimator import (
    DataPair,
    SampleCovariances,
    cca,
    read_data_pair,
    sample_cca,
    sample_covariances,
    sample_gaussian,
    standard_form_reduce,
    write_data_pair,
)
from cca_subspace.harness import ExperimentConfig, run_sweep
from cca_subspace.linalg import projector, sqrt_and_inv_sqrt
from cca_subspace.losses import principal_angles
from cca_subspace.population import (
    CanonicalSpec,
    JointCovariance,
    build_joint,
    population_cca,
    random_spec,
)

DEFAULT_LAMBDAS = [0.9, 0.8, 0.3, 0.1, 0, 0, 0, 0, 0, 0]


def population_covs(cov: JointCovariance) -> SampleCovariances:
    return SampleCovariances(cov.sigma_x, cov.sigma_y, cov.sigma_xy, n=1)


class TestSampleGaussian:
    def test_identity_law_of_large_numbers(self):
        cov = JointCovariance(np.eye(2), np.eye(2), np.zeros((2, 2)))
        data = sample_gaussian(cov, 100_000, seed=1)
        z = np.hstack([data.x, data.y])
        assert np.linalg.norm(z.T @ z / data.n - np.eye(4), 2) <= 0.03

    def test_perfect_correlation(self):
        data = sample_gaussian(JointCovariance([[1.0]], [[1.0]], [[1.0]]), 1000, seed=2)
        assert np.max(np.abs(data.x - data.y)) <= 1e-6

    def test_deterministic(self):
        cov = build_joint(random_spec(3, 4, [0.7, 0.5, 0.1], seed=3))
        a = sample_gaussian(cov, 50, seed=7)
        b = sample_gaussian(cov, 50, seed=7)
        assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)

    def test_not_psd(self):
        with pytest.raises(NotPsd):
            sample_gaussian(JointCovariance([[1.0]], [[1.0]], [[1.5]]), 10, seed=0)

    def test_too_few(self):
        with pytest.raises(TooFewSamples):
            sample_gaussian(JointCovariance([[1.0]], [[1.0]], [[0.0]]), 0)


class TestSampleCovariances:
    def test_single_row(self):
        c = sample_covariances(DataPair([[1.0, 2.0]], [[3.0]]))
        np.testing.assert_allclose(c.sx, [[1, 2], [2, 4]])
        np.testing.assert_allclose(c.sxy, [[3], [6]])
        np.testing.assert_allclose(c.sy, [[9]])

    def test_x_equals_y(self, rng):
        x = rng.standard_normal((20, 3))
        c = sample_covariances(DataPair(x, x))
        np.testing.assert_allclose(c.sxy, c.sx)

    def test_constructed_data_oracle(self, rng):
        p, n = 4, 50
        a = rng.standard_normal((p, p))
        sigma = a @ a.T + np.eye(p)
        low = np.linalg.cholesky(sigma)
        q, _ = np.linalg.qr(rng.standard_normal((n, p)))
        x = math.sqrt(n) * q @ low.T
        c = sample_covariances(DataPair(x, x[:, :1]))
        np.testing.assert_allclose(c.sx, sigma, rtol=1e-13, atol=1e-13)

    def test_centering_divisor_n(self):
        x = np.array([[1.0], [3.0]])
        c = sample_covariances(DataPair(x, x), center=True)
        np.testing.assert_allclose(c.sx, [[1.0]])

    def test_centering_needs_two_rows(self):
        with pytest.raises(TooFewSamples):
            sample_covariances(DataPair([[1.0]], [[1.0]]), center=True)

    def test_mismatched_rows(self):
        with pytest.raises(DimensionMismatch):
            DataPair(np.zeros((3, 2)), np.zeros((4, 2)))


class TestSampleCca:
    def test_population_input_is_exact(self):
        spec = random_spec(6, 5, [0.9, 0.7, 0.4, 0.2, 0.1], k=2, kappa_x=30, kappa_y=30, seed=4)
        cov = build_joint(spec)
        est = sample_cca(population_covs(cov), 2)
        pop = population_cca(cov)
        assert principal_angles(est.phi, pop.phi[:, :2], cov.sigma_x).l2 <= 1e-10
        np.testing.assert_allclose(est.phi.T @ cov.sigma_x @ est.phi, np.eye(2), atol=1e-8)

    def test_standard_form_diagonal(self):
        lam = [0.9, 0.6, 0.3]
        cov = JointCovariance(np.eye(3), np.eye(3), np.diag(lam))
        est = sample_cca(population_covs(cov), 2)
        np.testing.assert_allclose(np.abs(est.phi), np.eye(3)[:, :2], atol=1e-12)
        np.testing.assert_allclose(est.lambdas, lam[:2])

    def test_rate_self_consistency(self):
        spec = CanonicalSpec(np.eye(10), np.eye(10), DEFAULT_LAMBDAS, np.eye(10), np.eye(10), 2)
        res = run_sweep(ExperimentConfig(spec, (4000, 8000), 200, master_seed=17, losses=("fro",)))
        k = 2
        m4, s4 = res[0].mean_loss["fro"] / (2 * k), res[0].std_err["fro"] / (2 * k)
        m8, s8 = res[1].mean_loss["fro"] / (2 * k), res[1].std_err["fro"] / (2 * k)
        assert abs(m4 - 2 * m8) <= 3 * math.hypot(s4, 2 * s8)

    def test_constraints_and_range(self, rng):
        cov = build_joint(random_spec(4, 3, [0.95, 0.5, 0.2], k=1, kappa_x=5, seed=9))
        c = sample_covariances(sample_gaussian(cov, 60, seed=5))
        est = sample_cca(c, 3)
        np.testing.assert_allclose(est.phi.T @ c.sx @ est.phi, np.eye(3), atol=1e-8)
        np.testing.assert_allclose(est.psi.T @ c.sy @ est.psi, np.eye(3), atol=1e-8)
        assert np.all((est.lambdas >= 0) & (est.lambdas <= 1))

    def test_singular_when_n_too_small(self):
        cov = JointCovariance(np.eye(5), np.eye(5), np.zeros((5, 5)))
        with pytest.raises(Singular):
            sample_cca(sample_covariances(sample_gaussian(cov, 3, seed=0)), 1)

    def test_ridge_rescues_small_n(self):
        cov = JointCovariance(np.eye(5), np.eye(5), np.zeros((5, 5)))
        est = sample_cca(sample_covariances(sample_gaussian(cov, 3, seed=0)), 1, ridge=0.1)
        assert est.info["ridge"] == 0.1

    def test_rank_too_large(self):
        cov = JointCovariance(np.eye(2), np.eye(3), np.zeros((2, 3)))
        with pytest.raises(RankTooLarge):
            sample_cca(population_covs(cov), 3)

    def test_tie_recorded(self):
        cov = JointCovariance(np.eye(2), np.eye(2), 0.5 * np.eye(2))
        assert sample_cca(population_covs(cov), 1).info.get("tie_at_k") is True

    def test_convenience_wrapper(self, rng):
        x = rng.standard_normal((40, 3))
        y = x[:, :2] + 0.1 * rng.standard_normal((40, 2))
        est = cca(x, y, 2)
        assert est.phi.shape == (3, 2)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_estimator_linear_invariance(self, seed):
        g = np.random.default_rng(seed)
        spec = random_spec(4, 5, [0.9, 0.6, 0.3, 0.1], k=2, kappa_x=4, kappa_y=4, seed=seed)
        cov = build_joint(spec)
        phi = population_cca(cov).phi[:, :2]
        data = sample_gaussian(cov, 200, seed=seed)
        t1 = g.standard_normal((4, 4)) + 2.5 * np.eye(4)
        t2 = g.standard_normal((5, 5)) + 2.5 * np.eye(5)
        base = principal_angles(cca(data.x, data.y, 2).phi, phi, cov.sigma_x)
        moved = principal_angles(
            cca(data.x @ t1, data.y @ t2, 2).phi, np.linalg.solve(t1, phi), t1.T @ cov.sigma_x @ t1
        )
        assert abs(base.l2 - moved.l2) <= 1e-8
        assert abs(base.l1 - moved.l1) <= 1e-8


class TestStandardFormReduce:
    def test_identity_loadings(self, rng):
        cov = JointCovariance(np.eye(3), np.eye(3), np.diag([0.9, 0.4, 0.1]))
        data = sample_gaussian(cov, 30, seed=1)
        pop = population_cca(cov, complete=True)
        out = standard_form_reduce(data, pop)
        np.testing.assert_allclose(np.abs(out.x), np.abs(data.x), atol=1e-14)
        np.testing.assert_allclose(np.abs(out.y), np.abs(data.y), atol=1e-14)

    def test_reduced_population_is_standard(self):
        spec = random_spec(4, 6, [0.8, 0.5, 0.3, 0.1], k=2, kappa_x=10, kappa_y=10, seed=6)
        cov = build_joint(spec)
        pop = population_cca(cov, complete=True)
        np.testing.assert_allclose(pop.phi.T @ cov.sigma_x @ pop.phi, np.eye(4), atol=1e-8)
        np.testing.assert_allclose(pop.psi.T @ cov.sigma_y @ pop.psi, np.eye(6), atol=1e-8)
        block = np.zeros((4, 6))
        block[:4, :4] = np.diag(spec.lambdas)
        np.testing.assert_allclose(pop.phi.T @ cov.sigma_xy @ pop.psi, block, atol=1e-8)

    def test_loss_equality(self):
        spec = random_spec(5, 5, [0.9, 0.7, 0.4, 0.2, 0.0], k=2, kappa_x=50, kappa_y=20, seed=12)
        cov = build_joint(spec)
        pop = population_cca(cov, complete=True)
        data = sample_gaussian(cov, 300, seed=3)
        est = cca(data.x, data.y, 2)
        root, _ = sqrt_and_inv_sqrt(cov.sigma_x, inverse=False)
        lhs = np.linalg.norm(projector(root @ est.phi) - projector(root @ pop.phi[:, :2]), 2)
        red = standard_form_reduce(data, pop)
        est_a = cca(red.x, red.y, 2)
        rhs = np.linalg.norm(projector(est_a.phi) - projector(np.eye(5)[:, :2]), 2)
        assert abs(lhs - rhs) <= 1e-8
        # the reduced estimate is Phi^{-1} Phi_hat
        np.testing.assert_allclose(
            projector(est_a.phi), projector(np.linalg.solve(pop.phi, est.phi)), atol=1e-8
        )

    def test_singular_loadings(self):
        data = DataPair(np.ones((3, 2)), np.ones((3, 2)))
        pop = population_cca(JointCovariance(np.eye(2), np.eye(2), 0.5 * np.eye(2)), complete=True)
        bad = type(pop)(np.array([[1.0, 1.0], [1.0, 1.0]]), pop.psi, pop.lambdas)
        with pytest.raises(Singular):
            standard_form_reduce(data, bad)


def test_csv_round_trip(tmp_path, rng):
    data = DataPair(rng.standard_normal((7, 3)), rng.standard_normal((7, 2)))
    for header in (False, True):
        write_data_pair(data, tmp_path / "x.csv", tmp_path / "y.csv", header=header)
        back = read_data_pair(tmp_path / "x.csv", tmp_path / "y.csv", header=header)
        assert np.array_equal(back.x, data.x) and np.array_equal(back.y, data.y)
