"""Fixed-interval smoothing of state moments and J-step-ahead forecasting."""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._jit import njit
from .errors import ForecastError, KDGLMError, NumericalError
from .families import Family, get_family
from .filter import FilterRecord, FilterTrajectory
from .state_space import StateModel, evolve, floored_solve, predictor_prior

DEFAULT_QUANTILES = (0.025, 0.5, 0.975)


@dataclass(frozen=True)
class SmoothedTrajectory:
    m: np.ndarray  # (T, p)
    C: np.ndarray  # (T, p, p)
    f: np.ndarray  # (T, k) smoothed predictor mean F_t' m_t
    Q: np.ndarray  # (T, k, k) smoothed predictor covariance F_t' C_t F_t


@njit
def _rts_backward(m, C, a, R, G):
    T, p = m.shape
    ms = np.empty_like(m)
    Cs = np.empty_like(C)
    ms[T - 1] = m[T - 1]
    Cs[T - 1] = C[T - 1]
    for t in range(T - 2, -1, -1):
        # B = C_t G' R_{t+1}^{-1}
        B = floored_solve(R[t + 1], np.ascontiguousarray(G @ C[t])).T
        ms[t] = m[t] + B @ (ms[t + 1] - a[t + 1])
        S = C[t] + B @ (Cs[t + 1] - R[t + 1]) @ B.T
        Cs[t] = 0.5 * (S + S.T)
    return ms, Cs


def smooth(trajectory: FilterTrajectory, model: Optional[StateModel] = None) -> SmoothedTrajectory:
    model = model or trajectory.model
    if len(trajectory) == 0:
        raise NumericalError("cannot smooth an empty trajectory")
    m = np.ascontiguousarray(trajectory.m)
    C = np.ascontiguousarray(trajectory.C)
    a = np.ascontiguousarray(trajectory.a)
    R = np.ascontiguousarray(trajectory.R)
    ms, Cs = _rts_backward(m, C, a, R, np.ascontiguousarray(model.G))
    if not (np.all(np.isfinite(ms)) and np.all(np.isfinite(Cs))):
        bad = int(np.where(~np.isfinite(ms).all(axis=1))[0].max(initial=0))
        raise NumericalError(f"smoother produced non-finite moments at t={bad}")
    T = m.shape[0]
    f = np.empty((T, model.k))
    Q = np.empty((T, model.k, model.k))
    for t in range(T):
        F = model.F(t)
        f[t] = F.T @ ms[t]
        Q[t] = F.T @ Cs[t] @ F
    return SmoothedTrajectory(ms, Cs, f, Q)


@dataclass(frozen=True)
class ForecastBundle:
    horizons: np.ndarray  # (J,) 1..J
    a: np.ndarray
    R: np.ndarray
    f: np.ndarray
    Q: np.ndarray
    tau: list  # ConjugateParams per horizon
    mean: np.ndarray  # (J, n_out) predictive mean of Y_{T+j}
    var: np.ndarray
    quantile_levels: tuple
    quantiles: np.ndarray  # (J, n_q, n_out)


def forecast_step(a, R, model: StateModel, t: int):
    """Propagate state moments one step to (0-based) time ``t``."""
    a, R = evolve(a, R, model, t)
    f, Q = predictor_prior(a, R, model, t)
    return a, R, f, Q


def forecast(last: FilterRecord, model: StateModel, J: int, family: Optional[Family] = None,
             quantiles: Sequence[float] = DEFAULT_QUANTILES, trials=None) -> ForecastBundle:
    """J-step-ahead forecasts from the final filtered record.

    The discount construction of the evolution covariance is reapplied at
    every horizon. Each predictor prior is projected onto the conjugate
    family and summarised through the conjugate predictive.
    """
    if int(J) < 1:
        raise ValueError("forecast horizon J must be >= 1")
    family = family or get_family(model.family, d=model.k)
    a, R = last.m, last.C
    out = {"a": [], "R": [], "f": [], "Q": [], "tau": [], "mean": [], "var": [], "q": []}
    for j in range(1, int(J) + 1):
        t = last.t + j
        try:
            a, R, f, Q = forecast_step(a, R, model, t)
            tau = family.prior_to_conjugate(f, Q)
            summ = family.predictive_summary(tau, tuple(quantiles), trials)
        except KDGLMError as exc:
            raise ForecastError(j, exc) from exc
        for key, val in (("a", a), ("R", R), ("f", f), ("Q", Q), ("tau", tau),
                         ("mean", summ["mean"]), ("var", summ["var"]), ("q", summ["quantiles"])):
            out[key].append(val)
    return ForecastBundle(np.arange(1, int(J) + 1), np.array(out["a"]), np.array(out["R"]),
                          np.array(out["f"]), np.array(out["Q"]), out["tau"],
                          np.array(out["mean"]), np.array(out["var"]), tuple(quantiles),
                          np.array(out["q"]))
