import itertools

import numpy as np
import pytest

from bayescdm.latent import (
    HigherOrderLatent,
    LongitudinalLatent,
    PriorSpec,
    UnstructuredLatent,
    attribute_prob_higher_order,
    build_sigma_from_cholesky,
    class_prior,
)
from bayescdm.models import logistic


class TestUnstructuredLatent:
    def test_simplex_enforced(self):
        with pytest.raises(ValueError):
            UnstructuredLatent(mixing=[0.5, 0.6])
        with pytest.raises(ValueError):
            UnstructuredLatent(mixing=[-0.1, 1.1])

    def test_default_scale_is_all_ones(self):
        lat = UnstructuredLatent(mixing=np.full(4, 0.25))
        assert np.array_equal(lat.dirichlet_scale, np.ones(4))

    def test_class_prior_uniform(self):
        lat = UnstructuredLatent(mixing=np.full(32, 1 / 32))
        for c in range(32):
            assert class_prior(lat, c) == pytest.approx(1 / 32)

    def test_class_prior_bounds(self):
        lat = UnstructuredLatent(mixing=np.full(4, 0.25))
        with pytest.raises(IndexError):
            class_prior(lat, 4)
        with pytest.raises(IndexError):
            class_prior(lat, -1)


class TestHigherOrder:
    def test_symmetric_point(self):
        p = HigherOrderLatent(slope=[1.0], intercept=[0.0])
        assert attribute_prob_higher_order(0.0, 0, p) == pytest.approx(0.5)

    def test_direct_evaluation(self):
        p = HigherOrderLatent(slope=[2.0], intercept=[1.0])
        assert attribute_prob_higher_order(1.0, 0, p) == pytest.approx(0.7311, abs=1e-4)

    def test_monotone_in_theta(self):
        p = HigherOrderLatent(slope=[1.5], intercept=[0.3])
        grid = np.linspace(-4, 4, 41)
        probs = [attribute_prob_higher_order(t, 0, p) for t in grid]
        assert all(b >= a for a, b in zip(probs, probs[1:]))

    def test_negative_slope_rejected_by_default(self):
        with pytest.raises(ValueError):
            HigherOrderLatent(slope=[-0.5], intercept=[0.0])
        # the truncation is a default, not a law
        HigherOrderLatent(slope=[-0.5], intercept=[0.0], slope_nonneg=False)


class TestCholesky:
    def test_two_by_two_algebra(self):
        phi, psi = 0.7, 0.6
        sigma = build_sigma_from_cholesky(np.array([[1.0, 0.0], [phi, psi]]))
        assert sigma[0, 0] == pytest.approx(1.0)
        assert sigma[0, 1] == pytest.approx(phi)
        assert sigma[1, 0] == pytest.approx(phi)
        assert sigma[1, 1] == pytest.approx(phi ** 2 + psi ** 2)

    def test_identity(self):
        assert np.array_equal(build_sigma_from_cholesky(np.eye(3)), np.eye(3))

    def test_first_variance_always_one(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            t = rng.integers(2, 5)
            delta = np.tril(rng.normal(size=(t, t)))
            np.fill_diagonal(delta, rng.uniform(0.2, 2.0, t))
            delta[0, 0] = 1.0
            delta[0, 1:] = 0.0
            sigma = build_sigma_from_cholesky(delta)
            assert sigma[0, 0] == pytest.approx(1.0)
            # positive definite
            assert np.linalg.eigvalsh(sigma).min() > 0

    def test_rejects_bad_factors(self):
        with pytest.raises(ValueError):
            build_sigma_from_cholesky(np.array([[1.0, 0.5], [0.5, 1.0]]))  # not triangular
        with pytest.raises(ValueError):
            build_sigma_from_cholesky(np.array([[2.0, 0.0], [0.5, 1.0]]))  # (1,1) != 1
        with pytest.raises(ValueError):
            build_sigma_from_cholesky(np.array([[1.0, 0.0], [0.5, -1.0]]))  # diag <= 0

    def test_round_trip_recovers_factor(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            t = rng.integers(2, 5)
            delta = np.tril(rng.normal(size=(t, t)))
            np.fill_diagonal(delta, rng.uniform(0.3, 2.0, t))
            delta[0, 0] = 1.0
            delta[0, 1:] = 0.0
            sigma = build_sigma_from_cholesky(delta)
            recovered = np.linalg.cholesky(sigma)
            assert np.allclose(recovered, delta, atol=1e-10)


class TestLongitudinalLatent:
    def test_first_mean_pinned(self):
        with pytest.raises(ValueError):
            LongitudinalLatent(mean=[0.5, 0.0], cholesky=np.eye(2))

    def test_covariance_property(self):
        lat = LongitudinalLatent(mean=[0.0, 0.3], cholesky=np.array([[1, 0], [0.5, 0.8]]))
        assert lat.covariance[0, 0] == pytest.approx(1.0)
        assert lat.n_occasions == 2


class TestMarginalPatternProbabilities:
    def test_quadrature_matches_simulation(self):
        """K=2 higher-order marginals: Gauss-Hermite integral vs 1e6 draws."""
        slope = np.array([1.2, 0.8])
        intercept = np.array([-0.4, 0.5])
        nodes, weights = np.polynomial.hermite_e.hermegauss(61)
        weights = weights / np.sqrt(2 * np.pi)

        def marginal(pattern):
            p = logistic(np.outer(nodes, slope) - intercept[None, :])
            like = np.prod(np.where(np.array(pattern) == 1, p, 1 - p), axis=1)
            return float(weights @ like)

        exact = {pat: marginal(pat) for pat in itertools.product((0, 1), repeat=2)}
        assert sum(exact.values()) == pytest.approx(1.0, abs=1e-10)

        rng = np.random.default_rng(7)
        n = 1_000_000
        theta = rng.standard_normal(n)
        mastery = logistic(np.outer(theta, slope) - intercept[None, :])
        alpha = (rng.random((n, 2)) < mastery).astype(int)
        for pat, prob in exact.items():
            freq = np.mean((alpha == np.array(pat)).all(axis=1))
            mc_se = np.sqrt(prob * (1 - prob) / n)
            assert abs(freq - prob) < 3 * mc_se + 1e-9


class TestPriorSpec:
    def test_defaults_match_conventions(self):
        pr = PriorSpec()
        assert pr.slip_a == pr.slip_b == pr.guess_a == pr.guess_b == 1.0
        assert pr.intercept_mean == pytest.approx(-1.096)
        assert pr.intercept_prec == pytest.approx(0.25)
        assert pr.resolved_kway_mean("rdina") == pytest.approx(2.192)
        assert pr.resolved_kway_mean("testlet-dina") == 0.0
        assert pr.resolved_kway_mean("long-dina") == 0.0

    def test_good_items_preset(self):
        pr = PriorSpec.good_items()
        assert (pr.slip_a, pr.slip_b, pr.guess_a, pr.guess_b) == (1.0, 3.0, 1.0, 3.0)
        assert (pr.baseline_a, pr.baseline_b) == (3.0, 1.0)
        assert (pr.penalty_a, pr.penalty_b) == (3.0, 1.0)

    def test_positivity_validated(self):
        with pytest.raises(ValueError):
            PriorSpec(slip_a=0.0)
        with pytest.raises(ValueError):
            PriorSpec(intercept_prec=-1.0)

    def test_explicit_kway_mean_wins(self):
        pr = PriorSpec(kway_mean=1.5)
        assert pr.resolved_kway_mean("testlet-dina") == 1.5
