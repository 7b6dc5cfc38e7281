"""Scalar special functions: log-gamma, digamma, trigamma and two inverses.

digamma and trigamma shift the argument upward with the recurrence until it is
at least 10, then evaluate the asymptotic series. The shifted terms are summed
from the smallest to the largest so that tiny arguments keep full precision.
"""

import math

from ._jit import njit
from .errors import DomainError, SolverError

EULER_GAMMA = 0.57721566490153286061

_SHIFT = 10.0


@njit
def _check_positive(x):
    if not (x > 0.0) or math.isinf(x):
        raise DomainError("argument must be positive and finite")


@njit
def log_gamma(x):
    _check_positive(x)
    return math.lgamma(x)


@njit
def _shift_count(x):
    n = 0
    while x + n < _SHIFT:
        n += 1
    return n


@njit
def _digamma_series(z):
    # z >= 10; Bernoulli-number tail truncated after six terms
    w = 1.0 / (z * z)
    tail = w * (1.0 / 12.0 - w * (1.0 / 120.0 - w * (1.0 / 252.0 - w * (
        1.0 / 240.0 - w * (1.0 / 132.0 - w * (691.0 / 32760.0))))))
    return -0.5 / z - tail


@njit
def digamma(x):
    _check_positive(x)
    n = _shift_count(x)
    z = x + n
    s = math.log(z) + _digamma_series(z)
    for i in range(n - 1, -1, -1):
        s -= 1.0 / (x + i)
    return s


@njit
def _two_prod(a, b):
    # Dekker: a*b == p + e exactly
    c = 134217729.0 * a
    a_hi = c - (c - a)
    a_lo = a - a_hi
    c = 134217729.0 * b
    b_hi = c - (c - b)
    b_lo = b - b_hi
    p = a * b
    e = ((a_hi * b_hi - p) + a_hi * b_lo + a_lo * b_hi) + a_lo * b_lo
    return p, e


@njit
def _inv_square(x):
    """1/x**2 as an unevaluated sum hi + lo."""
    q = 1.0 / x
    p, e = _two_prod(x, q)
    q_lo = ((1.0 - p) - e) / x
    hi, lo = _two_prod(q, q)
    return hi, lo + 2.0 * q * q_lo


@njit
def trigamma(x):
    _check_positive(x)
    n = _shift_count(x)
    z = x + n
    w = 1.0 / (z * z)
    tail = w * (1.0 / 6.0 - w * (1.0 / 30.0 - w * (1.0 / 42.0 - w * (
        1.0 / 30.0 - w * (5.0 / 66.0 - w * (691.0 / 2730.0))))))
    s = 1.0 / z + 0.5 * w + tail / z
    for i in range(n - 1, 0, -1):
        s += 1.0 / ((x + i) * (x + i))
    if n > 0:
        hi, lo = _inv_square(x)
        s = hi + (s + lo)
    return s


@njit
def digamma_minus_log(x):
    """psi(x) - ln(x), computed without cancellation for large x."""
    _check_positive(x)
    n = _shift_count(x)
    z = x + n
    s = _digamma_series(z)
    if n > 0:
        s += math.log1p(n / x)
        for i in range(n - 1, -1, -1):
            s -= 1.0 / (x + i)
    return s


@njit
def _inv_digamma_kernel(y, tol, max_iter):
    if y >= -2.22:
        x = math.exp(y) + 0.5
    else:
        x = -1.0 / (y + EULER_GAMMA)
    r = digamma(x) - y
    for _ in range(max_iter):
        if abs(r) <= tol:
            return x, r, True
        step = r / trigamma(x)
        x_new = x - step
        # psi is concave: from the right a Newton step can leave the domain
        if x_new <= 0.0:
            x_new = 0.5 * x
        x = x_new
        r = digamma(x) - y
    return x, r, abs(r) <= tol


def inv_digamma(y, tol=1e-12, max_iter=50):
    """Return x > 0 with digamma(x) == y."""
    if not math.isfinite(y):
        raise DomainError("inv_digamma requires a finite argument")
    x, r, ok = _inv_digamma_kernel(float(y), tol * max(1.0, abs(y)), max_iter)
    if not ok:
        raise SolverError("inv_digamma did not converge", abs(r))
    return x


@njit
def _inv_dml_kernel(c, max_iter):
    # h(x) = psi(x) - ln x increases from -inf to 0 on (0, inf)
    lo = 1e-8
    while digamma_minus_log(lo) > c:
        lo *= 1e-2
    hi = 1e12
    if -0.5 / hi < c:
        hi = 2.0 / (-c)
    x = 1.0 / (-2.0 * c) + 1.0 / 6.0
    if x <= lo or x >= hi:
        x = math.sqrt(lo * hi)
    tol = 1e-15 + 1e-14 * abs(c)
    r = digamma_minus_log(x) - c
    for _ in range(max_iter):
        if abs(r) <= tol:
            return x, r, True
        if r > 0.0:
            hi = x
        else:
            lo = x
        d = trigamma(x) - 1.0 / x
        x_new = x - r / d if d > 0.0 else -1.0
        if not (lo < x_new < hi):
            x_new = math.sqrt(lo * hi)
        if x_new == x:
            return x, r, True
        x = x_new
        r = digamma_minus_log(x) - c
    return x, r, abs(r) <= 1e-10


def inv_digamma_minus_log(c, max_iter=200):
    """Return the unique x > 0 with digamma(x) - ln(x) == c, for c < 0."""
    if not math.isfinite(c) or c >= 0.0:
        raise DomainError("inv_digamma_minus_log requires a finite c < 0")
    x, r, ok = _inv_dml_kernel(float(c), max_iter)
    if not ok:
        raise SolverError("inv_digamma_minus_log did not converge", abs(r))
    return x
