"""Synthetic data from a dynamic model with known states.

Random numbers come from numpy's Philox counter-based bit generator seeded
with the user seed, so a seed fully determines the output.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DataError, NumericalError
from .state_space import StateModel, check_covariance

EXP_LIMIT = 700.0
# numpy's Poisson sampler rejects rates above roughly 9.2e18
POISSON_LOG_RATE_LIMIT = 43.0


@dataclass(frozen=True)
class SimOutput:
    theta: np.ndarray  # (T, p)
    lam: np.ndarray  # (T, k)
    y: np.ndarray  # (T,) or (T, d) for multinomial counts
    trials: Optional[np.ndarray]
    seed: int
    covariates: dict


def rng_for(seed):
    return np.random.Generator(np.random.Philox(int(seed)))


def simulate(model: StateModel, W, theta0, T: int, seed: int, trials=None,
             covariates=None) -> SimOutput:
    """Draw theta_t = G theta_{t-1} + w_t, w_t ~ N(0, W), and observations.

    ``trials`` (scalar or length-T) is required for the multinomial family.
    Regression blocks read ``covariates``; when absent they are drawn as iid
    standard normals from the same generator and returned.
    """
    T = int(T)
    if T < 1:
        raise DataError("simulation length T must be >= 1")
    W = np.atleast_2d(np.asarray(W, dtype=float))
    if W.shape != (model.p, model.p):
        raise ConfigurationError(f"W must be {model.p}x{model.p}")
    check_covariance(W)
    theta0 = np.asarray(theta0, dtype=float)
    if theta0.shape != (model.p,):
        raise ConfigurationError(f"theta0 must have length {model.p}")
    rng = rng_for(seed)

    reg_names = [c for b in model.blocks if b.kind == "regression" for c in b.columns]
    cov = dict(covariates or {})
    for name in reg_names:
        if name not in cov:
            cov[name] = rng.standard_normal(T)
    if reg_names:
        model = model.with_covariates(cov)

    vals, vecs = np.linalg.eigh(W)
    L = vecs * np.sqrt(np.clip(vals, 0.0, None))
    theta = np.empty((T, model.p))
    lam = np.empty((T, model.k))
    prev = theta0
    for t in range(T):
        prev = model.G @ prev + L @ rng.standard_normal(model.p)
        theta[t] = prev
        lam[t] = model.F(t).T @ prev
    if np.any(np.abs(lam) > EXP_LIMIT) and model.family != "normal":
        raise NumericalError("linear predictor exceeds the exp-link range; rescale theta0 or W")

    fam = model.family
    m_arr = None
    if fam == "poisson":
        if np.any(lam[:, 0] > POISSON_LOG_RATE_LIMIT):
            raise NumericalError("Poisson rate too large to sample; rescale theta0 or W")
        y = rng.poisson(np.exp(lam[:, 0])).astype(float)
    elif fam == "bernoulli":
        p = 1.0 / (1.0 + np.exp(-lam[:, 0]))
        y = (rng.random(T) < p).astype(float)
    elif fam == "normal":
        if np.any(np.abs(lam[:, 1]) > EXP_LIMIT):
            raise NumericalError("log precision exceeds the exp-link range")
        sd = np.exp(-0.5 * lam[:, 1])
        y = lam[:, 0] + sd * rng.standard_normal(T)
    elif fam == "multinomial":
        if trials is None:
            raise ConfigurationError("multinomial simulation needs trials")
        m_arr = np.broadcast_to(np.asarray(trials, dtype=np.int64), (T,)).copy()
        full = np.concatenate([lam, np.zeros((T, 1))], axis=1)
        full -= full.max(axis=1, keepdims=True)
        probs = np.exp(full)
        probs /= probs.sum(axis=1, keepdims=True)
        y = np.array([rng.multinomial(m_arr[t], probs[t]) for t in range(T)], dtype=float)[:, :-1]
    else:
        raise ConfigurationError(f"cannot simulate family {fam!r}")
    return SimOutput(theta, lam, y, None if m_arr is None else m_arr.astype(float), int(seed),
                     {k: np.asarray(v[:T]) for k, v in cov.items() if k in reg_names})
