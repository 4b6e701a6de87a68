import math

import numpy as np
import pytest

from skewsgld.models import (
    DataSet,
    DoubleWellModel,
    Mixture2Model,
    Mixture10Model,
    QuadraticModel,
    generate_dataset_mixture2,
    generate_dataset_mixture10,
    hessian_vector_default,
    quadratic_stochastic_gradient,
)
from skewsgld.validate import check_gradient_fd, check_hessian_vector_fd


def fd_cost_gradient(model, theta, datum, h=1e-6):
    """Independent oracle: central difference of the per-datum cost, scaled
    back to the sampler gradient convention (factor T for dataset models)."""
    theta = np.asarray(theta, dtype=float)
    out = np.empty(theta.shape[0])
    for i in range(theta.shape[0]):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        out[i] = (model.sample_cost(tp, datum) - model.sample_cost(tm, datum)) / (2 * h)
    return out * getattr(model, "T", 1)


def dense_fd_hessian(model, theta, datum, h=1e-5):
    """Independent oracle: dense Hessian from finite differences of the gradient."""
    theta = np.asarray(theta, dtype=float)
    n = theta.shape[0]
    H = np.empty((n, n))
    for i in range(n):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        H[:, i] = (
            model.stochastic_gradient(tp, datum) - model.stochastic_gradient(tm, datum)
        ) / (2 * h)
    return H


@pytest.fixture(scope="module")
def mixture2():
    ds = generate_dataset_mixture2([0.0, 1.0], 100, np.random.default_rng(202401))
    return Mixture2Model(ds)


@pytest.fixture(scope="module")
def mixture10():
    mu, sigma2 = Mixture10Model.draw_hyperparams(np.random.default_rng(77))
    ds = generate_dataset_mixture10(mu, 100, np.random.default_rng(202402))
    return Mixture10Model(ds, mu=mu, sigma2=sigma2)


class TestDataSet:
    def test_mixture2_sample_mean_near_mixture_mean(self):
        # theta_true [0, 1]: mixture mean 0.5, std sqrt(2 + 1/4) -> |err| < 0.5
        ds = generate_dataset_mixture2([0.0, 1.0], 100, np.random.default_rng(5))
        assert len(ds) == 100
        assert abs(ds.observations.mean() - 0.5) < 0.5

    def test_symmetric_mixture_collapses(self):
        ds = generate_dataset_mixture2([0.0, 0.0], 10_000, np.random.default_rng(6))
        assert abs(ds.observations.mean()) < 0.05

    def test_deterministic_given_seed(self):
        a = generate_dataset_mixture2([0.0, 1.0], 50, np.random.default_rng(9))
        b = generate_dataset_mixture2([0.0, 1.0], 50, np.random.default_rng(9))
        assert np.array_equal(a.observations, b.observations)

    def test_cyclic_indexing_total(self):
        ds = DataSet([1.0, 2.0, 3.0])
        assert ds.observation(0) == 1.0
        assert ds.observation(3) == 1.0
        assert ds.observation(10**9 + 1) == 3.0

    def test_csv_round_trip(self, tmp_path):
        ds = generate_dataset_mixture2([0.0, 1.0], 25, np.random.default_rng(12))
        path = tmp_path / "data.csv"
        ds.save_csv(path)
        with open(path) as f:
            assert f.readline().strip() == "y"
        back = DataSet.load_csv(path)
        assert np.array_equal(back.observations, ds.observations)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            DataSet(np.zeros((0,)))

    def test_mixture10_dataset_component_means(self):
        theta = np.arange(10.0)
        ds = generate_dataset_mixture10(theta, 20_000, np.random.default_rng(15))
        # components N(10, 2) and N(35, 2): overall mean 22.5, se ~ 0.09
        assert abs(ds.observations.mean() - 22.5) < 0.5


class TestMixture2Gradient:
    def test_all_terms_vanish_at_origin(self, mixture2):
        g = mixture2.stochastic_gradient(np.zeros(2), 0.0)
        assert np.array_equal(g, np.zeros(2))

    def test_prior_term(self, mixture2):
        # subtract the likelihood part (finite difference of log lik) to
        # isolate -grad log p(theta) = [theta1/10, theta2]
        theta = np.array([10.0, 3.0])
        y = 11.0
        g = mixture2.stochastic_gradient(theta, y)
        h = 1e-6
        lik_grad = np.empty(2)
        for i in range(2):
            tp, tm = theta.copy(), theta.copy()
            tp[i] += h
            tm[i] -= h
            lik_grad[i] = (mixture2._log_lik(tp, y) - mixture2._log_lik(tm, y)) / (2 * h)
        prior_term = g + mixture2.T * lik_grad
        assert np.allclose(prior_term, [1.0, 3.0], atol=1e-4)

    def test_fd_agreement_100_points(self, mixture2):
        rng = np.random.default_rng(100)
        for _ in range(100):
            theta = rng.normal(0, 2, size=2)
            y = rng.normal(0, 3)
            g = mixture2.stochastic_gradient(theta, y)
            fd = fd_cost_gradient(mixture2, theta, y)
            assert np.all(np.abs(g - fd) <= np.maximum(1e-5, 1e-4 * np.abs(g)))

    def test_rejects_non_finite_theta(self, mixture2):
        with pytest.raises(ValueError, match="non-finite"):
            mixture2.stochastic_gradient(np.array([np.nan, 0.0]), 1.0)

    def test_full_log_target_is_negative_summed_cost(self, mixture2):
        # full_log_target == -(sum over the dataset of per-datum costs):
        # the prior is counted once via the 1/T weighting
        ds = DataSet(mixture2.dataset.observations[:5])
        model = Mixture2Model(ds)
        theta = np.array([0.7, -0.4])
        total = sum(model.sample_cost(theta, y) for y in ds.observations)
        assert math.isclose(model.full_log_target(theta), -total, rel_tol=1e-12)


class TestMixture10Gradient:
    def test_prior_stationary_point(self, mixture10):
        theta = mixture10.mu.copy()
        y = float(theta[:5].sum())  # component-1 residual is zero
        g = mixture10.stochastic_gradient(theta, y)
        r1, r2, e1, e2 = mixture10._mix_terms(theta, y)
        assert e1 == 0.0
        expected = np.zeros(10)
        expected[5:] = -mixture10.T * r2 * e2 / mixture10.lik_var
        assert np.allclose(g, expected, atol=1e-12)

    def test_fd_agreement_100_points(self, mixture10):
        rng = np.random.default_rng(101)
        for _ in range(100):
            theta = rng.normal(0, 2, size=10)
            y = rng.normal(0, 3)
            g = mixture10.stochastic_gradient(theta, y)
            fd = fd_cost_gradient(mixture10, theta, y)
            assert np.all(np.abs(g - fd) <= np.maximum(1e-5, 1e-4 * np.abs(g)))

    def test_within_half_likelihood_parts_match(self, mixture10):
        # coordinates inside one half differ only through the prior term
        rng = np.random.default_rng(102)
        theta = rng.normal(0, 1, size=10)
        y = rng.normal(0, 2)
        g = mixture10.stochastic_gradient(theta, y)
        prior = (theta - mixture10.mu) / mixture10.sigma2
        lik = g - prior
        assert np.allclose(lik[:5], lik[0], atol=1e-12)
        assert np.allclose(lik[5:], lik[5], atol=1e-12)


class TestQuadratic:
    def test_identity_matrix(self):
        m = QuadraticModel(np.eye(2))
        g = quadratic_stochastic_gradient(m, np.array([2.0, -1.0]), np.random.default_rng(0))
        assert np.array_equal(g, [2.0, -1.0])

    def test_diagonal_matrix(self):
        m = QuadraticModel(np.diag([1.0, 4.0]))
        g = quadratic_stochastic_gradient(m, np.array([1.0, 1.0]), np.random.default_rng(0))
        assert np.array_equal(g, [1.0, 4.0])

    def test_noisy_gradient_mean(self):
        m = QuadraticModel(np.diag([1.0, 4.0]), sigma_g=1.0)
        rng = np.random.default_rng(71)
        theta = np.array([0.5, -0.25])
        samples = np.stack(
            [quadratic_stochastic_gradient(m, theta, rng) for _ in range(10_000)]
        )
        # CLT bound: se = sigma_g / sqrt(n) = 0.01 per coordinate
        assert np.all(np.abs(samples.mean(axis=0) - m.A @ theta) < 0.05)

    def test_spd_validation(self):
        with pytest.raises(ValueError, match="positive definite"):
            QuadraticModel(np.diag([1.0, -1.0]))
        with pytest.raises(ValueError, match="symmetric"):
            QuadraticModel(np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_gibbs_covariance_oracle(self):
        m = QuadraticModel(np.diag([1.0, 4.0]))
        assert np.allclose(m.gibbs_covariance(2.0), np.diag([0.5, 0.125]))

    def test_centered_minimizer(self):
        m = QuadraticModel(np.eye(2), center=[3.0, 0.0])
        assert np.array_equal(m.stochastic_gradient([3.0, 0.0], None), [0.0, 0.0])
        assert m.sample_cost([3.0, 0.0], None) == 0.0


class TestHessianVector:
    def test_default_fd_on_quadratic_is_exact(self):
        m = QuadraticModel(np.array([[2.0, 0.5], [0.5, 1.0]]))
        rng = np.random.default_rng(8)
        xi = np.zeros(2)
        for _ in range(10):
            v = rng.standard_normal(2)
            hv = hessian_vector_default(m, rng.standard_normal(2), xi, v)
            assert np.allclose(hv, m.A @ v, atol=1e-8)

    def test_zero_vector_maps_to_zero(self):
        m = QuadraticModel(np.eye(3))
        hv = hessian_vector_default(m, np.ones(3), np.zeros(3), np.zeros(3))
        assert np.array_equal(hv, np.zeros(3))

    def test_default_fd_matches_dense_fd_on_mixture2(self, mixture2):
        rng = np.random.default_rng(9)
        for _ in range(20):
            theta = rng.normal(0, 1.5, size=2)
            y = rng.normal(0, 2)
            v = rng.standard_normal(2)
            hv = hessian_vector_default(mixture2, theta, y, v)
            ref = dense_fd_hessian(mixture2, theta, y) @ v
            assert np.all(np.abs(hv - ref) <= np.maximum(1e-4, 1e-4 * np.abs(ref)))

    def test_analytic_override_matches_dense_fd(self, mixture2, mixture10):
        rng = np.random.default_rng(10)
        for model in (mixture2, mixture10):
            for _ in range(20):
                theta = rng.normal(0, 1.5, size=model.dim)
                y = rng.normal(0, 2)
                v = rng.standard_normal(model.dim)
                hv = model.hessian_vector(theta, y, v)
                ref = dense_fd_hessian(model, theta, y) @ v
                assert np.all(np.abs(hv - ref) <= np.maximum(1e-4, 1e-4 * np.abs(ref)))

    def test_batched_rows_match_single(self, mixture10):
        rng = np.random.default_rng(11)
        theta = rng.normal(0, 1, size=10)
        y = 1.5
        V = rng.standard_normal((7, 10))
        HV = mixture10.hessian_vector(theta, y, V)
        for r in range(7):
            assert np.allclose(HV[r], mixture10.hessian_vector(theta, y, V[r]), atol=1e-13)


class TestDoubleWell:
    def test_minima(self):
        m = DoubleWellModel()
        for t in (-1.0, 1.0):
            assert m.sample_cost(np.array([t]), np.zeros(1)) == 0.0
            assert np.array_equal(m.stochastic_gradient(np.array([t]), np.zeros(1)), [0.0])

    def test_gradient_fd(self):
        m = DoubleWellModel(sigma_g=0.4)
        rng = np.random.default_rng(12)
        for _ in range(50):
            theta = rng.normal(0, 1.5, size=1)
            xi = rng.standard_normal(1)
            g = m.stochastic_gradient(theta, xi)
            fd = fd_cost_gradient(m, theta, xi)
            assert np.all(np.abs(g - fd) <= np.maximum(1e-5, 1e-4 * np.abs(g)))


def test_validate_checks_all_models_pass():
    from skewsgld.validate import _toy_models

    rng = np.random.default_rng(55)
    for model, sampler, name in _toy_models():
        assert check_gradient_fd(model, rng, sampler, n_points=25, name=name).passed
        assert check_hessian_vector_fd(model, rng, sampler, n_points=25, name=name).passed


def test_corrupted_gradient_fails_fd_check_with_coordinate():
    """Negative control: a broken gradient must be caught and localized."""

    class Corrupted(Mixture2Model):
        def stochastic_gradient(self, theta, datum):
            g = super().stochastic_gradient(theta, datum)
            g[1] += 0.5
            return g

    ds = generate_dataset_mixture2([0.0, 1.0], 10, np.random.default_rng(1))
    bad = Corrupted(ds)
    result = check_gradient_fd(bad, np.random.default_rng(2), lambda r: float(r.normal()), 10, "bad")
    assert not result.passed
    assert "coordinate 1" in result.detail
