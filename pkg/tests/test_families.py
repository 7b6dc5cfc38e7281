import itertools
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from kdglm.errors import DataError, DomainError, SolverError
from kdglm.families import (Bernoulli, ConjugateParams, LinearGaussian, Multinomial, Normal, Poisson,
                            conjugate_to_predictor, conjugate_update, get_family, log_predictive,
                            prior_to_conjugate)
from kdglm.special import inv_digamma_minus_log

PI2_6 = math.pi ** 2 / 6
F_GRID = [-2.0, -1.0, 0.0, 1.0, 2.0]
Q_GRID = [0.05, 0.1, 0.2, 0.35, 0.5]


def predictor(family, f, q):
    if family.k == 1:
        return np.array([f]), np.array([[q]])
    return np.array([f, 0.5 * f]), np.diag([q, 0.5 * q])


class TestPoisson:
    def test_fast_mode_closed_form(self):
        tau = Poisson(fast=True).prior_to_conjugate([0.0], [[1.0]]).tau
        np.testing.assert_allclose(tau, [1.0, math.exp(-0.5)], rtol=1e-14)

    def test_exact_mode_matches_first_moments(self):
        fam = Poisson()
        p = fam.prior_to_conjugate([0.3], [[0.25]])
        # E[lambda] = f and E[e^lambda] = e^{f + q/2} under the Gaussian
        assert stats.gamma(p.tau[0], scale=1 / p.tau[1]).expect(np.log) == pytest.approx(0.3, abs=1e-8)
        assert p.tau[0] / p.tau[1] == pytest.approx(math.exp(0.3 + 0.125), rel=1e-12)

    def test_update(self):
        p = Poisson().update(ConjugateParams("poisson", [2.0, 1.0]), 3)
        np.testing.assert_array_equal(p.tau, [5.0, 2.0])

    def test_to_predictor(self):
        f, Q = Poisson().to_predictor(ConjugateParams("poisson", [1.0, 1.0]))
        assert f[0] == pytest.approx(-0.5772156649015329, abs=1e-12)
        assert Q[0, 0] == pytest.approx(PI2_6, abs=1e-10)

    def test_predictive_at_zero(self):
        assert Poisson().log_predictive(ConjugateParams("poisson", [1.0, 1.0]), 0) == \
            pytest.approx(math.log(0.5), abs=1e-14)

    def test_zero_variance_is_handled(self):
        p = Poisson().prior_to_conjugate([1.0], [[0.0]])
        assert np.all(np.isfinite(p.tau)) and p.tau[0] > 1e10

    @pytest.mark.parametrize("y", [-1, 1.5, math.nan])
    def test_invalid_observation(self, y):
        with pytest.raises(DataError):
            Poisson().update(ConjugateParams("poisson", [1.0, 1.0]), y)

    def test_predictive_normalises(self):
        p = ConjugateParams("poisson", [2.5, 0.7])
        total = sum(math.exp(Poisson().log_predictive(p, y)) for y in range(400))
        assert total == pytest.approx(1.0, abs=1e-10)


class TestBernoulli:
    @given(st.floats(0.01, 3.0))
    def test_symmetric_at_zero(self, q):
        t1, t0 = Bernoulli().prior_to_conjugate([0.0], [[q]]).tau
        assert t1 + 1 == pytest.approx(t0 - t1 + 1, rel=1e-10)

    def test_uniform_predictive(self):
        assert Bernoulli().log_predictive(ConjugateParams("bernoulli", [0.0, 0.0]), 1) == \
            pytest.approx(math.log(0.5), abs=1e-15)

    def test_update(self):
        p = Bernoulli().update(ConjugateParams("bernoulli", [0.5, 2.0]), 1)
        np.testing.assert_array_equal(p.tau, [1.5, 3.0])

    def test_predictor_uses_trigamma_twice(self):
        f, Q = Bernoulli().to_predictor(ConjugateParams("bernoulli", [0.0, 0.0]))
        assert f[0] == pytest.approx(0.0, abs=1e-14)
        assert Q[0, 0] == pytest.approx(2 * PI2_6, abs=1e-10)

    def test_zero_variance_rejected(self):
        with pytest.raises(SolverError):
            Bernoulli().prior_to_conjugate([0.0], [[0.0]])

    def test_predictive_normalises(self):
        p = ConjugateParams("bernoulli", [0.7, 3.2])
        total = sum(math.exp(Bernoulli().log_predictive(p, y)) for y in (0, 1))
        assert total == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("y", [2, -1, 0.5])
    def test_invalid_observation(self, y):
        with pytest.raises(DataError):
            Bernoulli().update(ConjugateParams("bernoulli", [0.0, 0.0]), y)


class TestMultinomial:
    def test_update(self):
        p = Multinomial(2).update(ConjugateParams("multinomial", [1.0, 1.0, 1.0]), ([2, 1], 5))
        np.testing.assert_array_equal(p.tau, [3.0, 2.0, 3.0])

    def test_to_predictor_symmetric(self):
        f, Q = Multinomial(2).to_predictor(ConjugateParams("multinomial", [1.0, 1.0, 1.0]))
        np.testing.assert_allclose(f, [0.0, 0.0], atol=1e-14)
        np.testing.assert_allclose(Q, [[2 * PI2_6, PI2_6], [PI2_6, 2 * PI2_6]], atol=1e-10)

    def test_uniform_predictive(self):
        lp = Multinomial(2).log_predictive(ConjugateParams("multinomial", [1.0, 1.0, 1.0]), ([1, 0], 1))
        assert lp == pytest.approx(math.log(1 / 3), abs=1e-14)

    def test_degenerate_prior_rejected(self):
        with pytest.raises(SolverError):
            Multinomial(2).prior_to_conjugate([0.0, 0.0], np.zeros((2, 2)))

    def test_symmetric_projection(self):
        tau = Multinomial(2).prior_to_conjugate([0.0, 0.0], 0.3 * np.eye(2)).tau
        assert tau[0] == pytest.approx(tau[1], rel=1e-10)

    def test_predictive_normalises(self):
        fam = Multinomial(2)
        p = ConjugateParams("multinomial", [0.8, 2.1, 1.3])
        for m in range(6):
            total = sum(math.exp(fam.log_predictive(p, ([a, b], m)))
                        for a in range(m + 1) for b in range(m + 1 - a))
            assert total == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("y", [([4, 3], 5), ([-1, 0], 2), ([1], 2), ([0.5, 0], 1), "bad"])
    def test_invalid_observation(self, y):
        with pytest.raises(DataError):
            Multinomial(2).update(ConjugateParams("multinomial", [1.0, 1.0, 1.0]), y)


class TestNormal:
    def test_projection_procedure(self):
        p = Normal().prior_to_conjugate([0.0, 0.0], np.diag([0.5, 0.2]))
        mu0, c0, n0, d0 = Normal.moment_form(p)
        r = math.exp(0.1)
        assert n0 / 2 == pytest.approx(inv_digamma_minus_log(-0.1), rel=1e-12)
        root = mpmath.findroot(lambda x: mpmath.digamma(x) - mpmath.log(x) + mpmath.mpf("0.1"), 5)
        assert n0 / 2 == pytest.approx(float(root), rel=1e-10)
        assert mu0 == 0.0
        assert c0 == pytest.approx(1 / (0.5 * r), rel=1e-12)
        assert d0 == pytest.approx(n0 / r, rel=1e-12)

    def test_projection_moments_by_monte_carlo(self, rng):
        p = Normal().prior_to_conjugate([0.0, 0.0], np.diag([0.5, 0.2]))
        mu0, c0, n0, d0 = Normal.moment_form(p)
        phi = rng.gamma(n0 / 2, 2 / d0, size=1_000_000)
        mu = mu0 + rng.standard_normal(phi.size) / np.sqrt(c0 * phi)
        lam = rng.multivariate_normal([0.0, 0.0], np.diag([0.5, 0.2]), size=phi.size)
        lphi = np.exp(lam[:, 1])
        for a, b in [(phi, lphi), (phi * mu, lphi * lam[:, 0]), (np.log(phi), lam[:, 1])]:
            assert a.mean() == pytest.approx(b.mean(), abs=1e-2)

    def test_update(self):
        p = Normal().update(ConjugateParams("normal", [-1.0, 0.0, -1.0, 0.5]), 2.0)
        np.testing.assert_allclose(p.tau, [-1.5, 2.0, -3.0, 1.0])

    def test_to_predictor(self):
        f, Q = Normal().to_predictor(Normal.from_moment_form(0.0, 1.0, 6.0, 2.0))
        np.testing.assert_allclose(f, [0.0, 0.9227843350984671], atol=1e-12)
        np.testing.assert_allclose(Q, [[0.5, 0.0], [0.0, 0.3949340668482264]], atol=1e-10)

    def test_to_predictor_by_monte_carlo(self, rng):
        f, Q = Normal().to_predictor(Normal.from_moment_form(0.0, 1.0, 6.0, 2.0))
        phi = rng.gamma(3.0, 1.0, size=1_000_000)
        mu = rng.standard_normal(phi.size) / np.sqrt(phi)
        lam = np.column_stack([mu, np.log(phi)])
        np.testing.assert_allclose(lam.mean(axis=0), f, atol=1e-2)
        np.testing.assert_allclose(np.cov(lam.T), Q, atol=1e-2)

    def test_variance_undefined(self):
        with pytest.raises(DomainError, match="predictor variance undefined"):
            Normal().to_predictor(Normal.from_moment_form(0.0, 1.0, 2.0, 1.0))

    def test_cross_covariance_shifts_mean(self):
        Q = np.array([[0.4, 0.1], [0.1, 0.2]])
        mu0 = Normal.moment_form(Normal().prior_to_conjugate([1.0, 0.0], Q))[0]
        assert mu0 == pytest.approx(1.1, abs=1e-14)

    def test_predictive_is_student_t(self):
        p = Normal.from_moment_form(0.5, 2.0, 7.0, 3.0)
        expected = stats.t(7.0, 0.5, math.sqrt(3.0 / 7.0 * 1.5)).logpdf(1.2)
        assert Normal().log_predictive(p, 1.2) == pytest.approx(expected, rel=1e-13)


# Conjugacy: prior x likelihood normalised by adaptive quadrature must equal
# the conjugate posterior density.

def _check_posterior(logpost, logjoint, points, integrate_joint):
    z = integrate_joint(lambda *x: math.exp(logjoint(np.array(x))))
    for x in points:
        num = math.exp(logjoint(np.asarray(x))) / z
        assert num == pytest.approx(math.exp(logpost(np.asarray(x))), rel=1e-6)


class TestConjugacy:
    @pytest.mark.parametrize("tau, y", [([2.0, 1.5], 0), ([0.7, 0.3], 4), ([5.0, 2.0], 11)])
    def test_poisson(self, tau, y):
        fam, p = Poisson(), ConjugateParams("poisson", tau)
        post = fam.update(p, y)
        joint = lambda x: float(fam.logpdf(p, x[0]) + stats.poisson(x[0]).logpmf(y))
        _check_posterior(lambda x: float(fam.logpdf(post, x[0])), joint, [[0.3], [1.0], [4.0]],
                         lambda fn: integrate.quad(fn, 0, np.inf, epsrel=1e-12, limit=400)[0])

    @pytest.mark.parametrize("tau, y", [([0.5, 1.0], 1), ([0.0, 3.0], 0)])
    def test_bernoulli(self, tau, y):
        fam, p = Bernoulli(), ConjugateParams("bernoulli", tau)
        post = fam.update(p, y)
        joint = lambda x: float(fam.logpdf(p, x[0]) + stats.bernoulli(x[0]).logpmf(y))
        _check_posterior(lambda x: float(fam.logpdf(post, x[0])), joint, [[0.1], [0.5], [0.8]],
                         lambda fn: integrate.quad(fn, 0, 1, epsrel=1e-12)[0])

    def test_multinomial(self):
        fam, p = Multinomial(2), ConjugateParams("multinomial", [1.5, 2.0, 1.2])
        y = ([2, 1], 4)
        post = fam.update(p, y)

        def joint(x):
            full = [x[0], x[1], 1 - x[0] - x[1]]
            return float(fam.logpdf(p, x) + stats.multinomial(4, full).logpmf([2, 1, 1]))

        def integ(fn):
            return integrate.dblquad(lambda b, a: fn(a, b), 0, 1, 0, lambda a: 1 - a,
                                     epsrel=1e-11, epsabs=0)[0]

        _check_posterior(lambda x: float(fam.logpdf(post, x)), joint,
                         [[0.2, 0.3], [0.5, 0.1], [0.3, 0.3]], integ)

    def test_normal(self):
        fam = Normal()
        p = Normal.from_moment_form(0.3, 1.5, 5.0, 2.0)
        post = fam.update(p, 1.1)

        def joint(x):
            mu, phi = x
            return float(fam.logpdf(p, x) + stats.norm(mu, 1 / math.sqrt(phi)).logpdf(1.1))

        def integ(fn):
            # tensor Gauss-Legendre on mu in [-15, 15], phi in [0, 40]
            x, w = np.polynomial.legendre.leggauss(800)
            mu, phi = 15 * x, 20 * (x + 1)
            M, P = np.meshgrid(mu, phi, indexing="ij")
            vals = np.exp(fam.logpdf(p, np.stack([M, P], axis=-1))
                          + stats.norm(M, 1 / np.sqrt(P)).logpdf(1.1))
            return float(np.sum(np.outer(15 * w, 20 * w) * vals))

        _check_posterior(lambda x: float(fam.logpdf(post, x)), joint,
                         [[0.5, 1.0], [0.0, 2.5], [1.0, 0.5]], integ)


class TestProjection:
    @pytest.mark.parametrize("name", ["poisson", "bernoulli", "normal", "multinomial"])
    def test_stationarity_residual(self, name):
        fam = get_family(name, d=2)
        for f, q in itertools.product(F_GRID, Q_GRID):
            fv, Q = predictor(fam, f, q)
            p = fam.prior_to_conjugate(fv, Q)
            assert fam.projection_residual(fv, Q, p) <= 1e-8, (f, q)

    @pytest.mark.parametrize("name", ["poisson", "bernoulli"])
    def test_round_trip(self, name):
        fam = get_family(name)
        for f, q in itertools.product(F_GRID, Q_GRID):
            ft, _ = fam.to_predictor(fam.prior_to_conjugate([f], [[q]]))
            assert abs(ft[0] - f) <= 0.05 * (1 + abs(f))

    def test_negative_covariance_rejected(self):
        with pytest.raises(DomainError):
            Poisson().prior_to_conjugate([0.0], [[-1.0]])

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            Normal().prior_to_conjugate([0.0], [[1.0]])

    def test_wrong_family_parameters(self):
        with pytest.raises(DomainError):
            Poisson().update(ConjugateParams("bernoulli", [0.0, 1.0]), 1)


class TestBernoulliReduction:
    @given(st.floats(-3, 3), st.floats(0.02, 2.0))
    def test_projection(self, f, q):
        tb = Bernoulli().prior_to_conjugate([f], [[q]]).tau
        tm = Multinomial(1).prior_to_conjugate([f], [[q]]).tau
        # Beta(t1 + 1, t0 - t1 + 1) versus Dirichlet(a, b)
        np.testing.assert_allclose([tb[0] + 1, tb[1] - tb[0] + 1], tm, rtol=1e-6)

    @given(st.floats(0.1, 5), st.floats(0.1, 5), st.integers(0, 1))
    def test_update_predictor_and_score(self, a, b, y):
        pb = ConjugateParams("bernoulli", [a - 1, a + b - 2])
        pm = ConjugateParams("multinomial", [a, b])
        assert Bernoulli().log_predictive(pb, y) == pytest.approx(
            Multinomial(1).log_predictive(pm, ([y], 1)), rel=1e-12)
        ub, um = Bernoulli().update(pb, y), Multinomial(1).update(pm, ([y], 1))
        fb, Qb = Bernoulli().to_predictor(ub)
        fm, Qm = Multinomial(1).to_predictor(um)
        np.testing.assert_allclose(fb, fm, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(Qb, Qm, rtol=1e-12)


class TestModuleFunctions:
    def test_dispatch(self):
        p = prior_to_conjugate("poisson", [0.0], [[0.5]])
        post = conjugate_update(p, 2)
        f, Q = conjugate_to_predictor(post)
        assert np.isfinite(log_predictive(post, 1))
        assert Q[0, 0] < 0.5

    def test_unknown_family(self):
        with pytest.raises(DomainError):
            get_family("gamma")


class TestLinearGaussian:
    def test_update_is_kalman(self):
        fam = LinearGaussian([[0.5]])
        p = fam.prior_to_conjugate([1.0], [[2.0]])
        f, Q = fam.to_predictor(fam.update(p, [3.0]))
        assert f[0] == pytest.approx(1.0 + 2.0 / 2.5 * 2.0)
        assert Q[0, 0] == pytest.approx(2.0 - 4.0 / 2.5)
