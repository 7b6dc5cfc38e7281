"""Sequential filtering: evolution, conjugate projection and update,
back-projection to predictor moments, and the linear Bayes state update."""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ._jit import njit
from .errors import ConfigurationError, DataError, FilterError, KDGLMError
from .families import ConjugateParams, Family, get_family
from .state_space import (GaussianMoments, StateModel, check_covariance, evolve,
                          floored_solve, predictor_prior)


@dataclass(frozen=True)
class InterventionSpec:
    """Manual intervention applied to the state prior (a, R) at time ``time``.

    ``mode="inflate"`` multiplies the prior covariance of the listed blocks
    (all blocks when ``blocks`` is empty) by ``factor``; ``mode="override"``
    replaces (a, R) with ``mean`` and ``cov``.
    """

    time: int
    mode: str = "inflate"
    factor: float = 1.0
    blocks: Tuple[int, ...] = ()
    mean: Optional[np.ndarray] = None
    cov: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(int(b) for b in self.blocks))
        if self.mode == "inflate":
            if not self.factor >= 1.0:
                raise ConfigurationError(f"inflation factor must be >= 1, got {self.factor}")
        elif self.mode == "override":
            if self.mean is None or self.cov is None:
                raise ConfigurationError("override intervention needs mean and cov")
            mom = GaussianMoments(self.mean, self.cov)
            check_covariance(mom.cov)
            object.__setattr__(self, "mean", mom.mean)
            object.__setattr__(self, "cov", mom.cov)
        else:
            raise ConfigurationError(f"unknown intervention mode {self.mode!r}")

    def apply(self, a, R, model: StateModel):
        if self.mode == "override":
            if self.mean.shape != a.shape:
                raise ConfigurationError("override mean has the wrong dimension")
            return self.mean.copy(), self.cov.copy()
        R = R.copy()
        slices = model.block_slices
        chosen = self.blocks or tuple(range(len(slices)))
        for b in chosen:
            if not 0 <= b < len(slices):
                raise ConfigurationError(f"intervention block {b} does not exist")
            sl = slices[b]
            R[sl, sl] *= self.factor
        return a, R


@dataclass
class ObservationSeries:
    """Time-indexed observations.

    ``values`` is (T,) for scalar families, (T, d) category counts for the
    multinomial family (with ``trials`` of shape (T,)), or (T, k) for the
    Gaussian reference family. NaN marks a missing observation.
    """

    values: np.ndarray
    trials: Optional[np.ndarray] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 0 or self.values.shape[0] == 0:
            raise DataError("observation series is empty")
        if self.trials is not None:
            self.trials = np.asarray(self.trials, dtype=float).ravel()
            if self.trials.shape[0] != self.values.shape[0]:
                raise DataError("trials column length does not match the counts")

    def __len__(self):
        return self.values.shape[0]

    def __getitem__(self, t):
        v = self.values[t]
        if np.any(np.isnan(v)):
            return None
        if self.trials is not None:
            m = self.trials[t]
            if np.isnan(m):
                return None
            return (v, m)
        return v


@dataclass(frozen=True)
class FilterRecord:
    t: int
    a: np.ndarray
    R: np.ndarray
    f: np.ndarray
    Q: np.ndarray
    tau: Optional[ConjugateParams]
    tau_star: Optional[ConjugateParams]
    f_star: np.ndarray
    Q_star: np.ndarray
    m: np.ndarray
    C: np.ndarray
    log_score: float
    missing: bool = False
    # the approximate back-projection raised predictor variance in some direction
    variance_increase: bool = False


@dataclass
class FilterTrajectory:
    model: StateModel
    family: Family
    prior: GaussianMoments
    records: List[FilterRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def _stack(self, name):
        return np.array([getattr(r, name) for r in self.records])

    def __getattr__(self, name):
        if name in ("a", "R", "f", "Q", "f_star", "Q_star", "m", "C", "log_score"):
            return self._stack(name)
        raise AttributeError(name)

    @property
    def total_log_score(self):
        return float(sum(r.log_score for r in self.records if not r.missing))

    @property
    def last(self):
        return self.records[-1]


@njit
def _linear_bayes(a, R, F, f, Q, f_star, Q_star):
    RF = R @ F
    # A' = Q^{-1} F' R, via a floored symmetric solve
    At = floored_solve(Q, np.ascontiguousarray(RF.T))
    m = a + At.T @ (f_star - f)
    C = R + At.T @ (Q_star - Q) @ At
    return m, 0.5 * (C + C.T)


def linear_bayes(a, R, F, f, Q, f_star, Q_star):
    c = np.ascontiguousarray
    return _linear_bayes(c(a, dtype=float), c(R, dtype=float), c(F, dtype=float),
                         c(f, dtype=float), c(Q, dtype=float),
                         c(f_star, dtype=float), c(Q_star, dtype=float))


def _variance_increased(Q, Q_star):
    D = np.asarray(Q) - np.asarray(Q_star)
    return bool(np.linalg.eigvalsh(0.5 * (D + D.T))[0] < -1e-12 * max(1.0, np.trace(Q)))


def filter_step(m_prev, C_prev, model: StateModel, y_t, intervention: Optional[InterventionSpec] = None,
                t: int = 0, family: Optional[Family] = None) -> FilterRecord:
    """One filtering cycle at time ``t``; ``y_t`` of None means missing."""
    family = family or get_family(model.family, d=model.k)
    a, R = evolve(m_prev, C_prev, model, t)
    if intervention is not None:
        a, R = intervention.apply(a, R, model)
    F = model.F(t)
    f, Q = predictor_prior(a, R, model, t)
    if y_t is None:
        return FilterRecord(t, a, R, f, Q, None, None, f, Q, a, R, math.nan, missing=True)
    tau = family.prior_to_conjugate(f, Q)
    score = family.log_predictive(tau, y_t)
    tau_star = family.update(tau, y_t)
    f_star, Q_star = family.to_predictor(tau_star)
    m, C = linear_bayes(a, R, F, f, Q, f_star, Q_star)
    return FilterRecord(t, a, R, f, Q, tau, tau_star, f_star, Q_star, m, C, score,
                        variance_increase=_variance_increased(Q, Q_star))


def default_prior(model: StateModel) -> GaussianMoments:
    return GaussianMoments(np.zeros(model.p), np.eye(model.p))


def filter_series(model: StateModel, ys, prior: Optional[GaussianMoments] = None,
                  interventions: Sequence[InterventionSpec] = (),
                  family: Optional[Family] = None) -> FilterTrajectory:
    """Run the filter over ``ys``.

    ``prior`` holds the moments of the state at time 0 (before the first
    evolution); it defaults to N(0, I).
    """
    if not isinstance(ys, ObservationSeries):
        ys = ObservationSeries(ys)
    family = family or get_family(model.family, d=model.k)
    if family.k != model.k:
        raise ConfigurationError(f"family {family!r} needs k={family.k}, model has k={model.k}")
    prior = prior or default_prior(model)
    if prior.mean.shape != (model.p,):
        raise ConfigurationError(f"prior has dimension {prior.mean.size}, model has p={model.p}")
    by_time = {}
    for iv in interventions:
        if iv.time in by_time:
            raise ConfigurationError(f"more than one intervention at t={iv.time}")
        by_time[iv.time] = iv

    traj = FilterTrajectory(model, family, prior)
    m, C = prior.mean, prior.cov
    for t in range(len(ys)):
        try:
            rec = filter_step(m, C, model, ys[t], by_time.get(t), t=t, family=family)
        except DataError as exc:
            raise DataError(f"t={t}: {exc}") from exc
        except ConfigurationError:
            raise
        except KDGLMError as exc:
            raise FilterError(t, exc, partial=traj) from exc
        except (ValueError, np.linalg.LinAlgError, ZeroDivisionError) as exc:
            raise FilterError(t, exc, partial=traj) from exc
        traj.records.append(rec)
        m, C = rec.m, rec.C
    return traj
