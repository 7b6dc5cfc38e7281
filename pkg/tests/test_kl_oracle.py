import math

import numpy as np
import pytest
from scipy import special as sps
from scipy import stats

from kdglm.errors import NumericalError
from kdglm.families import Bernoulli, ConjugateParams, Normal, Poisson
from kdglm.kl_oracle import (QuadratureGrid, expected_statistics, kl_estimate,
                             moments_by_quadrature, oracle_prior_to_conjugate,
                             projection_objective)


def gamma_kl(a1, b1, a2, b2):
    return ((a1 - a2) * sps.digamma(a1) - sps.gammaln(a1) + sps.gammaln(a2)
            + a2 * (math.log(b1) - math.log(b2)) + a1 * (b2 - b1) / b1)


class TestQuadratureGrid:
    def test_gauss_hermite_moments(self):
        grid = QuadratureGrid.gauss_hermite([1.0, -2.0], [[0.5, 0.2], [0.2, 0.3]], order=20)
        assert grid.weights.sum() == pytest.approx(1.0, abs=1e-14)
        np.testing.assert_allclose(grid.expect(lambda x: x), [1.0, -2.0], atol=1e-12)
        cov = grid.expect(lambda x: (x - [1.0, -2.0])[:, :, None] * (x - [1.0, -2.0])[:, None, :])
        np.testing.assert_allclose(cov, [[0.5, 0.2], [0.2, 0.3]], atol=1e-12)

    def test_bad_weights(self):
        with pytest.raises(ValueError):
            QuadratureGrid(np.zeros(3), np.array([1.0, -1.0, 1.0]))


class TestKLEstimate:
    def test_self_divergence(self):
        grid = QuadratureGrid.trapezoid(-12, 12, 4001)
        lp = stats.norm(0.3, 1.2).logpdf
        assert kl_estimate(lambda x: lp(x[:, 0]), lambda x: lp(x[:, 0]), grid) == pytest.approx(0, abs=1e-8)

    def test_gamma_pair(self):
        grid = QuadratureGrid.trapezoid(1e-12, 80, 400_001)
        p, q = stats.gamma(2, scale=1.0), stats.gamma(2, scale=0.5)
        est = kl_estimate(lambda x: p.logpdf(x[:, 0]), lambda x: q.logpdf(x[:, 0]), grid)
        assert est == pytest.approx(gamma_kl(2, 1, 2, 2), abs=1e-6)

    def test_shifted_normal(self):
        grid = QuadratureGrid.trapezoid(-15, 16, 6001)
        est = kl_estimate(lambda x: stats.norm(1, 1).logpdf(x[:, 0]),
                          lambda x: stats.norm(0, 1).logpdf(x[:, 0]), grid)
        assert est == pytest.approx(0.5, abs=1e-8)

    def test_non_finite_node(self):
        grid = QuadratureGrid.trapezoid(-1, 1, 11)
        with pytest.raises(NumericalError, match="node"), np.errstate(all="ignore"):
            kl_estimate(lambda x: np.log(x[:, 0]), lambda x: x[:, 0], grid)


class TestExpectedStatistics:
    def test_poisson(self):
        es = expected_statistics("poisson", [0.4], [[0.3]])
        np.testing.assert_allclose(es, [0.4, math.exp(0.4 + 0.15)], rtol=1e-10)


class TestOracleProjection:
    def test_poisson_agrees_with_exact_solve(self):
        res = oracle_prior_to_conjugate("poisson", [0.0], [[0.25]])
        exact = Poisson().prior_to_conjugate([0.0], [[0.25]])
        np.testing.assert_allclose(res.params.tau, exact.tau, rtol=0.05)

    def test_bernoulli_near_stationary(self):
        res = oracle_prior_to_conjugate("bernoulli", [1.0], [[0.1]])
        assert Bernoulli().projection_residual([1.0], [[0.1]], res.params) <= 1e-3

    def test_normal_moments(self, rng):
        f, Q = np.zeros(2), np.diag([0.3, 0.1])
        res = oracle_prior_to_conjugate("normal", f, Q)
        mu0, c0, n0, d0 = Normal.moment_form(res.params)
        phi = rng.gamma(n0 / 2, 2 / d0, size=1_000_000)
        mu = mu0 + rng.standard_normal(phi.size) / np.sqrt(c0 * phi)
        lam = rng.multivariate_normal(f, Q, size=phi.size)
        ephi = np.exp(lam[:, 1])
        for a, b in [(phi, ephi), (phi * mu, ephi * lam[:, 0]), (phi * mu ** 2, ephi * lam[:, 0] ** 2),
                     (np.log(phi), lam[:, 1])]:
            assert a.mean() == pytest.approx(b.mean(), abs=1e-2)

    def test_oracle_is_a_maximum(self):
        f, Q = [0.5], [[0.2]]
        res = oracle_prior_to_conjugate("poisson", f, Q)
        for scale in (0.98, 1.02):
            moved = ConjugateParams("poisson", res.params.tau * [scale, 1.0])
            assert projection_objective("poisson", f, Q, moved) < res.objective

    def test_too_many_predictors(self):
        with pytest.raises(ValueError):
            oracle_prior_to_conjugate("multinomial", np.zeros(3), np.eye(3))


class TestMomentsByQuadrature:
    def test_gamma_identities(self):
        mom = moments_by_quadrature("poisson", ConjugateParams("poisson", [1.0, 1.0]))
        assert mom["f"][0] == pytest.approx(-0.5772156649015329, abs=1e-8)
        assert mom["Q"][0, 0] == pytest.approx(math.pi ** 2 / 6, abs=1e-8)

    def test_symmetric_beta(self):
        mom = moments_by_quadrature("bernoulli", ConjugateParams("bernoulli", [1.0, 2.0]))
        assert mom["f"][0] == pytest.approx(0.0, abs=1e-10)

    def test_uniform_dirichlet(self):
        mom = moments_by_quadrature("multinomial", ConjugateParams("multinomial", [1.0, 1.0, 1.0]),
                                    n_mc=200_000, seed=4)
        assert np.all(np.abs(mom["f"]) <= 4 * mom["se_f"])

    def test_normal_gamma(self):
        mom = moments_by_quadrature("normal", Normal.from_moment_form(0.2, 2.0, 6.0, 3.0))
        f, Q = Normal().to_predictor(Normal.from_moment_form(0.2, 2.0, 6.0, 3.0))
        np.testing.assert_allclose(mom["f"], f, atol=1e-8)
        np.testing.assert_allclose(mom["Q"], Q, atol=1e-8)
