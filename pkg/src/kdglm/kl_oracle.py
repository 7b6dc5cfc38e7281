"""Brute-force numerical counterparts of the closed-form projections.

Everything here is deliberately independent of :mod:`kdglm.families`' solvers
and of :mod:`kdglm.special`: log densities and expectations are built from
scipy special functions, Gauss-Hermite quadrature and adaptive quadrature, and
the KL projection is found by derivative-free simplex search.
"""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize
from scipy import special as sps

from .errors import NumericalError, SolverError
from .families import ConjugateParams, Normal

GH_ORDER = 64
GH_MAX_ORDER = 1024
GH_TOL = 1e-9


@dataclass(frozen=True)
class QuadratureGrid:
    """Nodes (n, dim) and positive weights (n,) over a named domain."""

    nodes: np.ndarray
    weights: np.ndarray
    domain: str = "real"

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        weights = np.asarray(self.weights, dtype=float)
        if weights.shape != (nodes.shape[0],) or np.any(weights <= 0):
            raise ValueError("weights must be positive, one per node")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def dim(self):
        return self.nodes.shape[1]

    def __len__(self):
        return self.weights.size

    def expect(self, fn):
        """Weighted sum of ``fn(nodes)`` (treating weights as a probability)."""
        vals = np.asarray(fn(self.nodes), dtype=float)
        return np.tensordot(self.weights, vals, axes=(0, 0))

    @classmethod
    def gauss_hermite(cls, mean, cov, order=GH_ORDER):
        """Tensor Gauss-Hermite rule for N(mean, cov); weights sum to one."""
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        x, w = np.polynomial.hermite_e.hermegauss(order)
        w = w / w.sum()
        k = mean.size
        grids = np.meshgrid(*([x] * k), indexing="ij")
        z = np.stack([g.ravel() for g in grids], axis=-1)
        wz = np.ones(z.shape[0])
        for g in np.meshgrid(*([w] * k), indexing="ij"):
            wz = wz * g.ravel()
        vals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
        L = vecs * np.sqrt(np.clip(vals, 0.0, None))
        keep = wz > 1e-300
        return cls(mean + z[keep] @ L.T, wz[keep], "gaussian")

    @classmethod
    def trapezoid(cls, lo, hi, n):
        """Product trapezoid rule on a box; lo/hi are per-dimension bounds."""
        lo, hi = np.atleast_1d(lo).astype(float), np.atleast_1d(hi).astype(float)
        axes, ws = [], []
        for a, b in zip(lo, hi):
            x = np.linspace(a, b, n)
            w = np.full(n, (b - a) / (n - 1))
            w[0] = w[-1] = 0.5 * w[0]
            axes.append(x)
            ws.append(w)
        grids = np.meshgrid(*axes, indexing="ij")
        nodes = np.stack([g.ravel() for g in grids], axis=-1)
        weights = np.ones(nodes.shape[0])
        for g in np.meshgrid(*ws, indexing="ij"):
            weights = weights * g.ravel()
        return cls(nodes, weights, "box")


def kl_estimate(log_p: Callable, log_q: Callable, grid: QuadratureGrid) -> float:
    """Quadrature estimate of KL(p || q) = int p log(p/q)."""
    lp = np.asarray(log_p(grid.nodes), dtype=float).ravel()
    lq = np.asarray(log_q(grid.nodes), dtype=float).ravel()
    bad = ~(np.isfinite(lp) & np.isfinite(lq))
    if np.any(bad):
        i = int(np.argmax(bad))
        raise NumericalError(f"non-finite log density at node {grid.nodes[i].tolist()}")
    return float(np.sum(grid.weights * np.exp(lp) * (lp - lq)))


# ---------------------------------------------------------------------------
# Expected sufficient statistics under the Gaussian predictor prior


def _stat_fn(family):
    """Map predictor samples lam (n, k) to the conjugate sufficient statistics."""
    if family == "poisson":
        return lambda lam: np.stack([lam[:, 0], np.exp(lam[:, 0])], axis=-1)
    if family == "bernoulli":
        # log pi, log(1 - pi)
        return lambda lam: np.stack([-np.logaddexp(0.0, -lam[:, 0]),
                                     -np.logaddexp(0.0, lam[:, 0])], axis=-1)
    if family == "multinomial":
        def stats_(lam):
            lse = np.logaddexp.reduce(np.concatenate([np.zeros((lam.shape[0], 1)), lam], axis=1),
                                      axis=1)
            return np.concatenate([lam - lse[:, None], -lse[:, None]], axis=1)
        return stats_
    if family == "normal":
        # phi mu^2, phi mu, phi, log phi
        def stats_(lam):
            mu, lphi = lam[:, 0], lam[:, 1]
            phi = np.exp(lphi)
            return np.stack([phi * mu * mu, phi * mu, phi, lphi], axis=-1)
        return stats_
    raise ValueError(f"unsupported family {family!r}")


def expected_statistics(family, f, Q, order=GH_ORDER):
    """E_p of the conjugate sufficient statistics for lambda ~ N(f, Q).

    The Gauss-Hermite order is doubled until successive estimates agree
    within GH_TOL.
    """
    fn = _stat_fn(family)
    prev = QuadratureGrid.gauss_hermite(f, Q, order).expect(fn)
    k = np.size(f)
    max_order = GH_MAX_ORDER if k == 1 else 256
    while order < max_order:
        order *= 2
        cur = QuadratureGrid.gauss_hermite(f, Q, order).expect(fn)
        if np.max(np.abs(cur - prev)) < GH_TOL * max(1.0, np.max(np.abs(cur))):
            return cur
        prev = cur
    return prev


def _objective(family, theta, es):
    """E_p[log q(eta | tau)] given expected statistics ``es`` (up to a constant
    that does not depend on tau)."""
    if family == "poisson":
        a, b = np.exp(theta)
        return a * math.log(b) - sps.gammaln(a) + (a - 1.0) * es[0] - b * es[1]
    if family in ("bernoulli", "multinomial"):
        alpha = np.exp(theta)
        return (sps.gammaln(alpha.sum()) - np.sum(sps.gammaln(alpha))
                + float(np.sum((alpha - 1.0) * es)))
    if family == "normal":
        mu0 = theta[0]
        c0, n0, d0 = np.exp(theta[1:])
        e_phimu2, e_phimu, e_phi, e_lphi = es
        quad = e_phimu2 - 2.0 * mu0 * e_phimu + mu0 * mu0 * e_phi
        return (0.5 * math.log(c0) + 0.5 * e_lphi - 0.5 * c0 * quad
                + 0.5 * n0 * math.log(d0 / 2.0) - sps.gammaln(n0 / 2.0)
                + (0.5 * n0 - 1.0) * e_lphi - 0.5 * d0 * e_phi)
    raise ValueError(family)


def _theta_of(params: ConjugateParams):
    tau = params.tau
    if params.family == "poisson":
        return np.log(tau)
    if params.family == "bernoulli":
        return np.log([tau[0] + 1.0, tau[1] - tau[0] + 1.0])
    if params.family == "multinomial":
        return np.log(tau)
    if params.family == "normal":
        mu0, c0, n0, d0 = Normal.moment_form(params)
        return np.array([mu0, math.log(c0), math.log(n0), math.log(d0)])
    raise ValueError(params.family)


def _params_of(family, theta):
    if family == "poisson":
        return ConjugateParams("poisson", np.exp(theta))
    if family == "bernoulli":
        alpha, beta = np.exp(theta)
        return ConjugateParams("bernoulli", [alpha - 1.0, alpha + beta - 2.0])
    if family == "multinomial":
        return ConjugateParams("multinomial", np.exp(theta))
    if family == "normal":
        c0, n0, d0 = np.exp(theta[1:])
        return Normal.from_moment_form(theta[0], c0, n0, d0)
    raise ValueError(family)


def projection_objective(family, f, Q, params: ConjugateParams, es=None) -> float:
    """E_p[log q(eta | tau)] for lambda ~ N(f, Q); larger is closer in KL."""
    if es is None:
        es = expected_statistics(family, f, Q)
    return float(_objective(family, _theta_of(params), es))


@dataclass(frozen=True)
class OracleResult:
    params: ConjugateParams
    objective: float
    trace: tuple  # best objective per start


def _starts(family, f, Q, es):
    f = np.atleast_1d(np.asarray(f, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    tr = max(float(np.trace(Q)), 1e-6)
    if family == "poisson":
        base = np.log([1.0 / tr, math.exp(-f[0]) / tr])
    elif family in ("bernoulli", "multinomial"):
        full = np.concatenate([f, [0.0]])
        base = np.log(np.maximum(np.exp(full - full.max()), 1e-3) * (len(full) / tr))
    else:
        r = math.exp(f[1] + Q[1, 1] / 2.0)
        base = np.array([f[0], math.log(1.0 / (max(Q[0, 0], 1e-6) * r)),
                         math.log(2.0 / max(Q[1, 1], 1e-6)),
                         math.log(2.0 / max(Q[1, 1], 1e-6) / r)])
    shifts = [0.0, 1.0, -1.0, 2.5]
    out = []
    for s in shifts:
        th = base.copy()
        if family == "normal":
            th[1:] = th[1:] + s
        else:
            th = th + s
        out.append(th)
    return out


def oracle_prior_to_conjugate(family, f, Q, es=None, xatol=1e-10, fatol=1e-13) -> OracleResult:
    """Maximise E_p[log q(eta | tau)] over tau by multi-start Nelder-Mead.

    Each start is re-launched from its own optimum until the objective stops
    improving; the best start wins (ties go to the lowest start index).
    """
    if np.size(f) > 2:
        raise ValueError("oracle projection supports at most two linear predictors")
    if es is None:
        es = expected_statistics(family, f, Q)

    def neg(theta):
        v = _objective(family, theta, es)
        return -v if np.isfinite(v) else np.inf

    best_theta, best_val, trace = None, -np.inf, []
    for theta in _starts(family, f, Q, es):
        val = -neg(theta)
        for _ in range(30):
            res = optimize.minimize(neg, theta, method="Nelder-Mead",
                                    options={"xatol": xatol, "fatol": fatol,
                                             "maxiter": 20000, "maxfev": 40000,
                                             "adaptive": True})
            improved = -res.fun > val + fatol
            theta, val = res.x, max(val, -res.fun)
            if not improved:
                break
        trace.append(val)
        if val > best_val + 1e-15:
            best_theta, best_val = theta, val
    if best_theta is None or not np.isfinite(best_val):
        raise SolverError("oracle optimisation stagnated", math.inf)
    return OracleResult(_params_of(family, best_theta), float(best_val), tuple(trace))


# ---------------------------------------------------------------------------
# Moments of the linear predictor under a conjugate distribution


def _quad_moments(logdens, center, scale):
    """Mean and variance of a 1-d density given by its (unnormalised) log."""
    lo, hi = center - 60.0 * scale, center + 60.0 * scale
    peak = logdens(center)
    dens = lambda x: math.exp(logdens(x) - peak)
    pts = [center - 5 * scale, center, center + 5 * scale]
    kw = dict(limit=500, epsabs=1e-13, epsrel=1e-11, points=pts)
    z = integrate.quad(dens, lo, hi, **kw)[0]
    mean = integrate.quad(lambda x: x * dens(x), lo, hi, **kw)[0] / z
    var = integrate.quad(lambda x: (x - mean) ** 2 * dens(x), lo, hi, **kw)[0] / z
    return mean, var, z


def moments_by_quadrature(family, params: ConjugateParams, n_mc=1_000_000, seed=0):
    """Mean and covariance of the linear predictor under the conjugate law.

    1-d families use adaptive quadrature on the predictor scale, the Normal
    family a product rule (quadrature over log precision, Gauss-Hermite over
    the mean given the precision) and the multinomial family Monte Carlo with
    Dirichlet draws. For Monte Carlo the returned dict also carries standard
    errors.
    """
    tau = params.tau
    if family == "poisson":
        a, b = tau
        # lambda = log eta, eta ~ Gamma(a, b): density ~ exp(a lam - b e^lam)
        ld = lambda x: a * x - b * math.exp(x)
        center = math.log(a / b)
        mean, var, _ = _quad_moments(ld, center, 1.0 / math.sqrt(a) + 1.0)
        return {"f": np.array([mean]), "Q": np.array([[var]])}
    if family == "bernoulli":
        alpha, beta = tau[0] + 1.0, tau[1] - tau[0] + 1.0
        # lambda = logit pi: density ~ exp(alpha lam) / (1 + e^lam)^(alpha + beta)
        ld = lambda x: alpha * x - (alpha + beta) * float(np.logaddexp(0.0, x))
        center = math.log(alpha / beta)
        mean, var, _ = _quad_moments(ld, center, math.sqrt(1.0 / alpha + 1.0 / beta) + 1.0)
        return {"f": np.array([mean]), "Q": np.array([[var]])}
    if family == "normal":
        mu0, c0, n0, d0 = Normal.moment_form(params)
        # outer: lambda2 = log phi ~ log-Gamma(n0/2, d0/2); inner: mu | phi Gaussian
        x, w = np.polynomial.hermite_e.hermegauss(20)
        w = w / w.sum()
        lg = lambda l2: 0.5 * n0 * l2 - 0.5 * d0 * math.exp(l2)
        center = math.log(n0 / d0)
        scale = math.sqrt(2.0 / n0) + 0.5
        lo, hi = center - 60 * scale, center + 60 * scale
        peak = lg(center)
        kw = dict(limit=500, epsabs=1e-13, epsrel=1e-11,
                  points=[center - 5 * scale, center, center + 5 * scale])

        def inner(l2, fn):
            mu = mu0 + x / math.sqrt(c0 * math.exp(l2))
            return float(np.sum(w * fn(mu, l2))) * math.exp(lg(l2) - peak)

        z = integrate.quad(lambda l2: inner(l2, lambda mu, l: np.ones_like(mu)), lo, hi, **kw)[0]
        E = lambda fn: integrate.quad(lambda l2: inner(l2, fn), lo, hi, **kw)[0] / z
        m1 = E(lambda mu, l: mu)
        m2 = E(lambda mu, l: np.full_like(mu, l))
        v11 = E(lambda mu, l: (mu - m1) ** 2)
        v12 = E(lambda mu, l: (mu - m1) * (l - m2))
        v22 = E(lambda mu, l: np.full_like(mu, (l - m2) ** 2))
        return {"f": np.array([m1, m2]), "Q": np.array([[v11, v12], [v12, v22]])}
    if family == "multinomial":
        rng = np.random.Generator(np.random.Philox(seed))
        pi = rng.dirichlet(tau, size=n_mc)
        lam = np.log(pi[:, :-1]) - np.log(pi[:, -1:])
        mean = lam.mean(axis=0)
        cen = lam - mean
        d = lam.shape[1]
        prods = cen[:, :, None] * cen[:, None, :]
        cov = prods.mean(axis=0) * n_mc / (n_mc - 1)
        se_f = lam.std(axis=0, ddof=1) / math.sqrt(n_mc)
        se_Q = prods.reshape(n_mc, d * d).std(axis=0, ddof=1).reshape(d, d) / math.sqrt(n_mc)
        return {"f": mean, "Q": cov, "se_f": se_f, "se_Q": se_Q}
    raise ValueError(f"unsupported family {family!r}")
