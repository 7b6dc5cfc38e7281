"""Conjugate exponential families and their Gaussian-predictor projections.

Each family maps a Gaussian prior N(f, Q) on the linear predictor to the
conjugate prior that minimises KL(p || q) (by matching expected sufficient
statistics), performs the additive conjugate update, and maps the conjugate
posterior back to Gaussian predictor moments.

Parameter vectors (``ConjugateParams.tau``):

* poisson      (shape, rate) of a Gamma prior on the rate
* bernoulli    (tau1, tau0) with Beta(tau1 + 1, tau0 - tau1 + 1)
* multinomial  Dirichlet concentrations (tau_1, ..., tau_{d+1})
* normal       canonical (tau1, tau2, tau3, tau0) of a Normal-Gamma
* gaussian     (f, vec Q) of an exact Gaussian predictor (known observation
               covariance); used as a Kalman reference
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sps
from scipy import stats

from ._jit import njit
from .errors import DataError, DomainError, SolverError
from .special import digamma, inv_digamma_minus_log, trigamma
from .state_space import EIG_FLOOR, check_covariance

DIRICHLET_TOL = 1e-10
DIRICHLET_MAX_ITER = 200


@dataclass(frozen=True)
class ConjugateParams:
    family: str
    tau: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tau", np.asarray(self.tau, dtype=float).copy())

    @property
    def tau0(self):
        if self.family in ("poisson", "bernoulli"):
            return float(self.tau[1])
        if self.family == "multinomial":
            return float(self.tau.sum())
        if self.family == "normal":
            return float(self.tau[3])
        return float("nan")


def _as_f_Q(f, Q, k):
    f = np.atleast_1d(np.asarray(f, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if f.shape != (k,) or Q.shape != (k, k):
        raise DomainError(f"expected f of length {k} and a {k}x{k} Q, got {f.shape} and {Q.shape}")
    if not np.all(np.isfinite(f)):
        raise DomainError("predictor mean is not finite")
    check_covariance(Q)
    return f, Q


# ---------------------------------------------------------------------------
# Solvers for E[log pi_l] = b_l under a Dirichlet (Beta when d = 1)


@njit
def _dirichlet_residual(tau, b):
    S = tau.sum()
    ps = digamma(S)
    r = np.empty(tau.size)
    for i in range(tau.size):
        r[i] = digamma(tau[i]) - ps - b[i]
    return r


@njit
def _dirichlet_solve(b, tau0, tol, max_iter):
    """Damped Newton in log-concentrations.

    Jacobian in tau is diag(trigamma(tau)) - trigamma(S) 11', inverted with
    Sherman-Morrison.
    """
    n = b.size
    u = np.log(tau0)
    tau = np.exp(u)
    r = _dirichlet_residual(tau, b)
    norm = np.max(np.abs(r))
    for it in range(max_iter):
        if norm <= tol:
            return tau, norm, True, it
        D = np.empty(n)
        for i in range(n):
            D[i] = trigamma(tau[i])
        c = trigamma(tau.sum())
        rd = r / D
        denom = 1.0 - c * np.sum(1.0 / D)
        step_tau = -(rd + (c * rd.sum() / denom) / D)
        du = step_tau / tau
        # keep each log-step bounded so tau stays positive and finite
        big = np.max(np.abs(du))
        if big > 2.0:
            du = du * (2.0 / big)
        lam = 1.0
        accepted = False
        for _ in range(40):
            u_try = u + lam * du
            tau_try = np.exp(u_try)
            r_try = _dirichlet_residual(tau_try, b)
            n_try = np.max(np.abs(r_try))
            if n_try < norm or n_try <= tol:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            return tau, norm, False, it
        u, tau, r, norm = u_try, tau_try, r_try, n_try
    return tau, norm, norm <= tol, max_iter


@njit
def _beta_residual(alpha, beta, f, g):
    r1 = digamma(alpha) - digamma(beta) - f
    r2 = digamma(beta) - digamma(alpha + beta) - g
    return r1, r2


@njit
def _beta_solve(f, g, alpha0, beta0, tol, max_iter):
    """Newton on (log alpha, log beta) for
    psi(alpha) - psi(beta) = f, psi(beta) - psi(alpha + beta) = g."""
    ua, ub = math.log(alpha0), math.log(beta0)
    alpha, beta = alpha0, beta0
    r1, r2 = _beta_residual(alpha, beta, f, g)
    norm = max(abs(r1), abs(r2))
    for it in range(max_iter):
        if norm <= tol:
            return alpha, beta, norm, True
        ta, tb, ts = trigamma(alpha), trigamma(beta), trigamma(alpha + beta)
        # Jacobian with respect to (log alpha, log beta)
        j11 = ta * alpha
        j12 = -tb * beta
        j21 = -ts * alpha
        j22 = (tb - ts) * beta
        det = j11 * j22 - j12 * j21
        da = -(j22 * r1 - j12 * r2) / det
        db = -(-j21 * r1 + j11 * r2) / det
        big = max(abs(da), abs(db))
        if big > 2.0:
            da *= 2.0 / big
            db *= 2.0 / big
        lam = 1.0
        accepted = False
        for _ in range(40):
            a_try = math.exp(ua + lam * da)
            b_try = math.exp(ub + lam * db)
            s1, s2 = _beta_residual(a_try, b_try, f, g)
            n_try = max(abs(s1), abs(s2))
            if n_try < norm or n_try <= tol:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            return alpha, beta, norm, False
        ua += lam * da
        ub += lam * db
        alpha, beta, r1, r2, norm = a_try, b_try, s1, s2, n_try
    return alpha, beta, norm, norm <= tol


def _log1pexp(x):
    return float(np.logaddexp(0.0, x))


# ---------------------------------------------------------------------------


class Family:
    name = ""
    k = 1

    def prior_to_conjugate(self, f, Q):
        raise NotImplementedError

    def update(self, params, y):
        raise NotImplementedError

    def to_predictor(self, params):
        raise NotImplementedError

    def log_predictive(self, params, y):
        raise NotImplementedError

    def predictive_summary(self, params, quantiles=(), trials=None):
        raise NotImplementedError

    def logpdf(self, params, eta):
        """Log density of the conjugate distribution at natural-scale points."""
        raise NotImplementedError

    def projection_residual(self, f, Q, params):
        """Max-abs residual of the moment-matching system used by prior_to_conjugate."""
        raise NotImplementedError

    def _params(self, tau):
        return ConjugateParams(self.name, tau)

    def _check(self, params):
        if params.family != self.name:
            raise DomainError(f"{self.name} family given {params.family} parameters")
        if not np.all(np.isfinite(params.tau)):
            raise DomainError("non-finite conjugate parameters")

    def __repr__(self):
        return f"{type(self).__name__}()"


class Poisson(Family):
    """Poisson counts, log link, Gamma(shape, rate) conjugate prior.

    With ``fast=True`` the projection uses the large-shape digamma
    approximation shape = 1/q, rate = exp(-(f + q/2))/q instead of the exact
    solve.
    """

    name = "poisson"
    k = 1

    def __init__(self, fast=False):
        self.fast = bool(fast)

    def __repr__(self):
        return f"Poisson(fast={self.fast})"

    def prior_to_conjugate(self, f, Q):
        f, Q = _as_f_Q(f, Q, 1)
        f, q = f[0], max(Q[0, 0], EIG_FLOOR)
        if self.fast:
            shape = 1.0 / q
            rate = math.exp(-(f + q / 2.0)) / q
        else:
            shape = inv_digamma_minus_log(-q / 2.0)
            rate = shape * math.exp(-(f + q / 2.0))
        return self._params([shape, rate])

    def projection_residual(self, f, Q, params):
        shape, rate = params.tau
        f0, q = float(np.ravel(f)[0]), float(np.ravel(Q)[0])
        r1 = digamma(shape) - math.log(rate) - f0
        r2 = math.log(shape / rate) - (f0 + q / 2.0)
        return max(abs(r1), abs(r2))

    def check_observation(self, y):
        y = float(y)
        if not (y >= 0 and y == math.floor(y)):
            raise DataError(f"Poisson observation must be a nonnegative integer, got {y}")
        return y

    def update(self, params, y):
        self._check(params)
        y = self.check_observation(y)
        shape, rate = params.tau
        return self._params([shape + y, rate + 1.0])

    def to_predictor(self, params):
        self._check(params)
        shape, rate = params.tau
        return (np.array([digamma(shape) - math.log(rate)]),
                np.array([[trigamma(shape)]]))

    def log_predictive(self, params, y):
        self._check(params)
        y = self.check_observation(y)
        a, b = params.tau
        return (math.lgamma(a + y) - math.lgamma(a) - math.lgamma(y + 1.0)
                + a * math.log(b / (b + 1.0)) - y * math.log1p(b))

    def predictive_summary(self, params, quantiles=(), trials=None):
        a, b = params.tau
        dist = stats.nbinom(a, b / (b + 1.0))
        return {"mean": np.array([a / b]),
                "var": np.array([a / b * (1.0 + 1.0 / b)]),
                "quantiles": np.array([[dist.ppf(qq)] for qq in quantiles]).reshape(len(quantiles), 1)}

    def logpdf(self, params, eta):
        a, b = params.tau
        eta = np.asarray(eta, dtype=float)
        return a * np.log(b) - sps.gammaln(a) + (a - 1.0) * np.log(eta) - b * eta


class Bernoulli(Family):
    """Binary responses, logit link, Beta conjugate prior.

    The second projection equation uses the second-order Taylor expectation
    E[log(1 - pi)] ~ log(1/(1 + e^f)) - (q/2) e^f / (1 + e^f)^2.
    """

    name = "bernoulli"
    k = 1

    @staticmethod
    def _targets(f, q):
        s = 1.0 / (1.0 + math.exp(-f)) if f > -700 else 0.0
        return -_log1pexp(f) - 0.5 * q * s * (1.0 - s)

    @staticmethod
    def _beta(params):
        t1, t0 = params.tau
        return t1 + 1.0, t0 - t1 + 1.0

    def prior_to_conjugate(self, f, Q):
        f, Q = _as_f_Q(f, Q, 1)
        f, q = float(f[0]), float(Q[0, 0])
        if q <= EIG_FLOOR:
            raise SolverError("zero predictor variance has no finite Beta match", math.inf)
        g = self._targets(f, q)
        alpha0 = min(max((1.0 + math.exp(min(f, 700.0))) / q, 1e-3), 1e8)
        beta0 = min(max((1.0 + math.exp(min(-f, 700.0))) / q, 1e-3), 1e8)
        alpha, beta, res, ok = _beta_solve(f, g, alpha0, beta0, DIRICHLET_TOL, DIRICHLET_MAX_ITER)
        if not ok:
            raise SolverError("Beta projection did not converge", res)
        return self._params([alpha - 1.0, alpha + beta - 2.0])

    def projection_residual(self, f, Q, params):
        alpha, beta = self._beta(params)
        f0, q = float(np.ravel(f)[0]), float(np.ravel(Q)[0])
        r1, r2 = _beta_residual(alpha, beta, f0, self._targets(f0, q))
        return max(abs(r1), abs(r2))

    def check_observation(self, y):
        y = float(y)
        if y not in (0.0, 1.0):
            raise DataError(f"Bernoulli observation must be 0 or 1, got {y}")
        return y

    def update(self, params, y):
        self._check(params)
        y = self.check_observation(y)
        t1, t0 = params.tau
        return self._params([t1 + y, t0 + 1.0])

    def to_predictor(self, params):
        self._check(params)
        alpha, beta = self._beta(params)
        return (np.array([digamma(alpha) - digamma(beta)]),
                np.array([[trigamma(alpha) + trigamma(beta)]]))

    def log_predictive(self, params, y):
        self._check(params)
        y = self.check_observation(y)
        alpha, beta = self._beta(params)
        return math.log((alpha if y == 1.0 else beta) / (alpha + beta))

    def predictive_summary(self, params, quantiles=(), trials=None):
        alpha, beta = self._beta(params)
        p = alpha / (alpha + beta)
        dist = stats.bernoulli(p)
        return {"mean": np.array([p]), "var": np.array([p * (1.0 - p)]),
                "quantiles": np.array([[dist.ppf(qq)] for qq in quantiles]).reshape(len(quantiles), 1)}

    def logpdf(self, params, eta):
        alpha, beta = self._beta(params)
        eta = np.asarray(eta, dtype=float)
        return ((alpha - 1.0) * np.log(eta) + (beta - 1.0) * np.log1p(-eta)
                - sps.betaln(alpha, beta))


class Multinomial(Family):
    """Counts on d + 1 categories with m trials; category d + 1 is the
    reference of the additive log-ratio link. Dirichlet conjugate prior."""

    name = "multinomial"

    def __init__(self, d):
        if int(d) < 1:
            raise DomainError("multinomial needs d >= 1")
        self.d = int(d)
        self.k = self.d

    def __repr__(self):
        return f"Multinomial(d={self.d})"

    def _mean_log_targets(self, f, Q):
        """Targets b_l for E_q[log pi_l], l = 1..d+1.

        E[log pi_{d+1}] uses the second-order expansion of
        -log(1 + sum exp(lambda)) about f; E[log(pi_l/pi_{d+1})] = f_l.
        """
        lse = float(np.logaddexp.reduce(np.concatenate([[0.0], f])))
        pi = np.exp(f - lse)
        half_trace = -0.5 * (float(pi @ np.diag(Q)) - float(pi @ Q @ pi))
        g = -lse + half_trace
        return np.concatenate([f + g, [g]]), half_trace

    def prior_to_conjugate(self, f, Q):
        f, Q = _as_f_Q(f, Q, self.d)
        b, half_trace = self._mean_log_targets(f, Q)
        if -half_trace <= 1e-14:
            raise SolverError("degenerate predictor covariance has no finite Dirichlet match",
                              math.inf)
        tr = max(float(np.trace(Q)), EIG_FLOOR)
        expf = np.exp(np.minimum(np.concatenate([f, [0.0]]), 700.0))
        tau0 = np.clip(np.maximum(expf, 0.1) * 2.0 / tr, 1e-3, 1e8)
        tau, res, ok, _ = _dirichlet_solve(b, tau0, DIRICHLET_TOL, DIRICHLET_MAX_ITER)
        if not ok:
            raise SolverError("Dirichlet projection did not converge", res)
        return self._params(tau)

    def projection_residual(self, f, Q, params):
        f = np.atleast_1d(np.asarray(f, dtype=float))
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        b, _ = self._mean_log_targets(f, Q)
        return float(np.max(np.abs(_dirichlet_residual(params.tau, b))))

    def check_observation(self, y):
        try:
            counts, m = y
        except (TypeError, ValueError):
            raise DataError("multinomial observation must be (counts, trials)") from None
        counts = np.asarray(counts, dtype=float).ravel()
        m = float(m)
        if counts.size != self.d:
            raise DataError(f"expected {self.d} category counts, got {counts.size}")
        if (np.any(counts < 0) or np.any(counts != np.floor(counts))
                or m != math.floor(m) or counts.sum() > m):
            raise DataError(f"invalid multinomial counts {counts.tolist()} with m={m}")
        return np.concatenate([counts, [m - counts.sum()]])

    def update(self, params, y):
        self._check(params)
        full = self.check_observation(y)
        return self._params(params.tau + full)

    def to_predictor(self, params):
        self._check(params)
        tau = params.tau
        ref_psi, ref_tri = digamma(tau[-1]), trigamma(tau[-1])
        f = np.array([digamma(t) - ref_psi for t in tau[:-1]])
        Q = np.full((self.d, self.d), ref_tri)
        for i in range(self.d):
            Q[i, i] += trigamma(tau[i])
        return f, Q

    def log_predictive(self, params, y):
        self._check(params)
        full = self.check_observation(y)
        tau = params.tau
        m = full.sum()
        S = tau.sum()
        return float(math.lgamma(m + 1.0) - np.sum(sps.gammaln(full + 1.0))
                     + math.lgamma(S) - math.lgamma(S + m)
                     + np.sum(sps.gammaln(tau + full) - sps.gammaln(tau)))

    def predictive_summary(self, params, quantiles=(), trials=None):
        """Per-category Beta-Binomial marginals for categories 1..d."""
        if trials is None:
            raise DomainError("multinomial predictive needs the number of trials")
        tau = params.tau
        S = tau.sum()
        m = float(trials)
        p = tau[:-1] / S
        mean = m * p
        var = m * p * (1.0 - p) * (S + m) / (S + 1.0)
        qs = np.array([[stats.betabinom(int(m), tau[i], S - tau[i]).ppf(qq)
                        for i in range(self.d)] for qq in quantiles]).reshape(len(quantiles), self.d)
        return {"mean": mean, "var": var, "quantiles": qs}

    def logpdf(self, params, eta):
        """Dirichlet log density at points ``eta`` of shape (..., d) holding pi_1..pi_d."""
        tau = params.tau
        eta = np.asarray(eta, dtype=float)
        last = 1.0 - eta.sum(axis=-1)
        logs = np.concatenate([np.log(eta), np.log(last)[..., None]], axis=-1)
        return (sps.gammaln(tau.sum()) - np.sum(sps.gammaln(tau))
                + np.sum((tau - 1.0) * logs, axis=-1))


class Normal(Family):
    """Gaussian responses with dynamic mean (lambda_1 = mu) and log precision
    (lambda_2 = log phi). Normal-Gamma conjugate prior.

    The projection matches E[phi mu^2], E[phi mu], E[phi] and E[log phi] under
    the bivariate Gaussian predictor exactly, including the mean/precision
    cross-covariance Q_12.
    """

    name = "normal"
    k = 2

    @staticmethod
    def moment_form(params):
        """(mu0, c0, n0, d0) from canonical parameters."""
        t1, t2, t3, t0 = params.tau
        c0 = -2.0 * t1
        mu0 = -t2 / (2.0 * t1)
        d0 = 2.0 * (t2 * t2 / (4.0 * t1) - t3)
        n0 = 2.0 * (t0 + 0.5)
        return mu0, c0, n0, d0

    @classmethod
    def from_moment_form(cls, mu0, c0, n0, d0):
        return ConjugateParams(cls.name, [-c0 / 2.0, c0 * mu0,
                                          -(c0 * mu0 * mu0 / 2.0 + d0 / 2.0), n0 / 2.0 - 0.5])

    def _check(self, params):
        super()._check(params)
        mu0, c0, n0, d0 = self.moment_form(params)
        if not (c0 > 0 and n0 > 0 and d0 > 0):
            raise DomainError(f"invalid Normal-Gamma parameters c0={c0}, n0={n0}, d0={d0}")

    def prior_to_conjugate(self, f, Q):
        f, Q = _as_f_Q(f, Q, 2)
        q11, q22 = max(Q[0, 0], EIG_FLOOR), max(Q[1, 1], EIG_FLOOR)
        r = math.exp(f[1] + q22 / 2.0)
        mu0 = f[0] + Q[0, 1]
        c0 = 1.0 / (q11 * r)
        n0 = 2.0 * inv_digamma_minus_log(-q22 / 2.0)
        d0 = n0 / r
        return self.from_moment_form(mu0, c0, n0, d0)

    def projection_residual(self, f, Q, params):
        mu0, c0, n0, d0 = self.moment_form(params)
        f = np.ravel(f)
        Q = np.atleast_2d(Q)
        r = math.exp(f[1] + Q[1, 1] / 2.0)
        m1 = f[0] + Q[0, 1]
        ep = np.array([r * (m1 * m1 + Q[0, 0]), r * m1, r, f[1]])
        eq = np.array([mu0 * mu0 * n0 / d0 + 1.0 / c0, mu0 * n0 / d0, n0 / d0,
                       digamma(n0 / 2.0) - math.log(d0 / 2.0)])
        return float(np.max(np.abs(ep - eq) / np.maximum(1.0, np.abs(ep))))

    def check_observation(self, y):
        y = float(y)
        if not math.isfinite(y):
            raise DataError("Normal observation must be finite")
        return y

    def update(self, params, y):
        self._check(params)
        y = self.check_observation(y)
        t1, t2, t3, t0 = params.tau
        return self._params([t1 - 0.5, t2 + y, t3 - y * y / 2.0, t0 + 0.5])

    def to_predictor(self, params):
        self._check(params)
        mu0, c0, n0, d0 = self.moment_form(params)
        if n0 <= 2.0:
            raise DomainError(f"predictor variance undefined for n0={n0} <= 2")
        f = np.array([mu0, digamma(n0 / 2.0) - math.log(d0 / 2.0)])
        Q = np.array([[d0 / (c0 * (n0 - 2.0)), 0.0], [0.0, trigamma(n0 / 2.0)]])
        return f, Q

    def _student(self, params):
        mu0, c0, n0, d0 = self.moment_form(params)
        return stats.t(df=n0, loc=mu0, scale=math.sqrt(d0 / n0 * (1.0 + 1.0 / c0)))

    def log_predictive(self, params, y):
        self._check(params)
        return float(self._student(params).logpdf(self.check_observation(y)))

    def predictive_summary(self, params, quantiles=(), trials=None):
        mu0, c0, n0, d0 = self.moment_form(params)
        dist = self._student(params)
        var = d0 / n0 * (1.0 + 1.0 / c0) * n0 / (n0 - 2.0) if n0 > 2 else math.inf
        return {"mean": np.array([mu0]), "var": np.array([var]),
                "quantiles": np.array([[dist.ppf(qq)] for qq in quantiles]).reshape(len(quantiles), 1)}

    def logpdf(self, params, eta):
        """Normal-Gamma log density at points ``eta`` of shape (..., 2) = (mu, phi)."""
        mu0, c0, n0, d0 = self.moment_form(params)
        eta = np.asarray(eta, dtype=float)
        mu, phi = eta[..., 0], eta[..., 1]
        return (0.5 * np.log(c0 * phi / (2.0 * np.pi)) - 0.5 * c0 * phi * (mu - mu0) ** 2
                + (n0 / 2.0) * np.log(d0 / 2.0) - sps.gammaln(n0 / 2.0)
                + (n0 / 2.0 - 1.0) * np.log(phi) - d0 / 2.0 * phi)


class LinearGaussian(Family):
    """Exact Gaussian observation y ~ N(lambda, V) with known V.

    The projection is the identity and the update is the Kalman update on the
    predictor, so running the filter with this family reproduces the Kalman
    filter exactly.
    """

    name = "gaussian"

    def __init__(self, V):
        V = np.atleast_2d(np.asarray(V, dtype=float))
        check_covariance(V)
        self.V = V
        self.k = V.shape[0]

    def __repr__(self):
        return f"LinearGaussian(k={self.k})"

    def _unpack(self, params):
        k = self.k
        return params.tau[:k], params.tau[k:].reshape(k, k)

    def prior_to_conjugate(self, f, Q):
        f, Q = _as_f_Q(f, Q, self.k)
        return self._params(np.concatenate([f, Q.ravel()]))

    def projection_residual(self, f, Q, params):
        fp, Qp = self._unpack(params)
        return float(max(np.max(np.abs(fp - f)), np.max(np.abs(Qp - Q))))

    def check_observation(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if y.shape != (self.k,) or not np.all(np.isfinite(y)):
            raise DataError("invalid Gaussian observation")
        return y

    def update(self, params, y):
        y = self.check_observation(y)
        f, Q = self._unpack(params)
        S = Q + self.V
        K = np.linalg.solve(S, Q).T
        f_new = f + K @ (y - f)
        Q_new = Q - K @ Q
        return self._params(np.concatenate([f_new, (0.5 * (Q_new + Q_new.T)).ravel()]))

    def to_predictor(self, params):
        f, Q = self._unpack(params)
        return f.copy(), Q.copy()

    def log_predictive(self, params, y):
        y = self.check_observation(y)
        f, Q = self._unpack(params)
        return float(stats.multivariate_normal(f, Q + self.V).logpdf(y))

    def predictive_summary(self, params, quantiles=(), trials=None):
        f, Q = self._unpack(params)
        sd = np.sqrt(np.diag(Q + self.V))
        return {"mean": f.copy(), "var": sd ** 2,
                "quantiles": np.array([f + sd * stats.norm.ppf(qq) for qq in quantiles]).reshape(len(quantiles), self.k)}


FAMILIES = ("poisson", "bernoulli", "normal", "multinomial")


def get_family(name, d=None, fast_poisson=False):
    if isinstance(name, Family):
        return name
    name = str(name).lower()
    if name == "poisson":
        return Poisson(fast=fast_poisson)
    if name == "bernoulli":
        return Bernoulli()
    if name == "normal":
        return Normal()
    if name == "multinomial":
        if d is None:
            raise DomainError("multinomial family needs d")
        return Multinomial(d)
    raise DomainError(f"unknown family {name!r}")


def _family_of(params):
    if params.family == "multinomial":
        return Multinomial(params.tau.size - 1)
    return get_family(params.family)


def prior_to_conjugate(family, f, Q):
    return get_family(family, d=np.size(f)).prior_to_conjugate(f, Q)


def conjugate_update(params, y):
    return _family_of(params).update(params, y)


def conjugate_to_predictor(params):
    return _family_of(params).to_predictor(params)


def log_predictive(params, y):
    return _family_of(params).log_predictive(params, y)
