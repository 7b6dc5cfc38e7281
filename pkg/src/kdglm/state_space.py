"""Gaussian state layer: structural blocks, discount evolution, predictor prior."""

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np

from ._jit import njit
from .errors import ConfigurationError, DomainError

EIG_FLOOR = 1e-12

BLOCK_KINDS = ("polynomial", "harmonic", "regression")


@dataclass(frozen=True)
class BlockSpec:
    """One structural component of the state vector.

    ``targets`` lists the (0-based) linear predictors the block feeds. A
    polynomial block of order ``n`` contributes ``n`` states, a harmonic two,
    a regression block one state per covariate column.
    """

    kind: str
    discount: float = 1.0
    targets: Tuple[int, ...] = (0,)
    order: int = 1
    period: float = 0.0
    index: int = 1
    columns: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        object.__setattr__(self, "columns", tuple(self.columns))
        if self.kind not in BLOCK_KINDS:
            raise ConfigurationError(f"unknown block kind {self.kind!r}")
        if not (0.0 < self.discount <= 1.0):
            raise ConfigurationError(f"discount must lie in (0, 1], got {self.discount}")
        if not self.targets:
            raise ConfigurationError("block must target at least one linear predictor")
        if len(set(self.targets)) != len(self.targets) or min(self.targets) < 0:
            raise ConfigurationError(f"invalid block targets {self.targets}")
        if self.kind == "polynomial" and self.order < 1:
            raise ConfigurationError("polynomial order must be >= 1")
        if self.kind == "harmonic":
            if self.index < 1:
                raise ConfigurationError("harmonic index must be >= 1")
            if not self.period > 0:
                raise ConfigurationError("harmonic period must be positive")
        if self.kind == "regression" and not self.columns:
            raise ConfigurationError("regression block needs at least one column")

    @property
    def dim(self):
        if self.kind == "polynomial":
            return self.order
        if self.kind == "harmonic":
            return 2
        return len(self.columns)

    def evolution_block(self):
        if self.kind == "polynomial":
            n = self.order
            return np.eye(n) + np.eye(n, k=1)
        if self.kind == "harmonic":
            w = 2.0 * np.pi * self.index / self.period
            c, s = np.cos(w), np.sin(w)
            return np.array([[c, s], [-s, c]])
        return np.eye(len(self.columns))


def polynomial(order=1, discount=1.0, targets=(0,)):
    return BlockSpec("polynomial", discount=discount, targets=targets, order=order)


def harmonic(period, index=1, discount=1.0, targets=(0,)):
    return BlockSpec("harmonic", discount=discount, targets=targets, period=period, index=index)


def regression(columns, discount=1.0, targets=(0,)):
    return BlockSpec("regression", discount=discount, targets=targets, columns=tuple(columns))


@dataclass(frozen=True)
class GaussianMoments:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise ConfigurationError(
                f"covariance shape {cov.shape} does not match mean length {mean.size}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    def validate(self, tol=1e-10):
        check_covariance(self.cov, tol)
        return self


def check_covariance(cov, tol=1e-10):
    """Raise DomainError unless ``cov`` is symmetric PSD within tolerance."""
    cov = np.asarray(cov, dtype=float)
    if not np.all(np.isfinite(cov)):
        raise DomainError("covariance has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(cov)))) if cov.size else 1.0
    if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-12 * scale:
        raise DomainError("covariance is not symmetric")
    if cov.size:
        lam_min = np.linalg.eigvalsh(cov)[0]
        if lam_min < -tol * max(np.trace(cov), 1.0):
            raise DomainError(f"covariance not positive semidefinite (min eigenvalue {lam_min:.3e})")


@dataclass(frozen=True)
class StateModel:
    """Structural definition of a dynamic model.

    ``G`` is fixed; ``F(t)`` depends on time only through regression columns,
    read from ``covariates`` (name -> array indexed by time).
    """

    blocks: Tuple[BlockSpec, ...]
    k: int
    family: str
    G: np.ndarray
    F_base: np.ndarray
    block_of_state: np.ndarray
    discounts: np.ndarray
    covariates: Mapping[str, np.ndarray] = field(default_factory=dict)
    _reg_rows: Tuple[Tuple[int, str, Tuple[int, ...]], ...] = ()

    @property
    def p(self):
        return self.G.shape[0]

    @property
    def block_slices(self):
        out, start = [], 0
        for b in self.blocks:
            out.append(slice(start, start + b.dim))
            start += b.dim
        return out

    @property
    def time_varying(self):
        return bool(self._reg_rows)

    def F(self, t):
        """p x k regression matrix at (0-based) time ``t``."""
        if not self._reg_rows:
            return self.F_base
        F = self.F_base.copy()
        for row, name, targets in self._reg_rows:
            x = self.covariates[name]
            if t < 0 or t >= len(x):
                raise ConfigurationError(
                    f"covariate {name!r} has no value at t={t} (length {len(x)})")
            v = float(x[t])
            if not np.isfinite(v):
                raise ConfigurationError(f"covariate {name!r} is missing at t={t}")
            F[row, list(targets)] = v
        return F

    def with_covariates(self, covariates):
        cov = {k: np.asarray(v, dtype=float) for k, v in covariates.items()}
        missing = {name for _, name, _ in self._reg_rows} - set(cov)
        if missing:
            raise ConfigurationError(f"missing covariate columns: {sorted(missing)}")
        return StateModel(self.blocks, self.k, self.family, self.G, self.F_base,
                          self.block_of_state, self.discounts, cov, self._reg_rows)


def build_structure(blocks: Sequence[BlockSpec], family: str, k: int,
                    covariates: Optional[Mapping[str, np.ndarray]] = None) -> StateModel:
    blocks = tuple(blocks)
    if not blocks:
        raise ConfigurationError("at least one block is required")
    if k < 1:
        raise ConfigurationError("k must be >= 1")
    names = [c for b in blocks if b.kind == "regression" for c in b.columns]
    if len(set(names)) != len(names):
        raise ConfigurationError("regression column names must be distinct")
    used = set()
    for b in blocks:
        if max(b.targets) >= k:
            raise ConfigurationError(
                f"block {b.kind} targets predictor {max(b.targets)} but k={k}")
        used.update(b.targets)
    if used != set(range(k)):
        raise ConfigurationError(f"predictors {sorted(set(range(k)) - used)} have no block")

    p = sum(b.dim for b in blocks)
    G = np.zeros((p, p))
    F = np.zeros((p, k))
    block_of_state = np.empty(p, dtype=np.int64)
    reg_rows = []
    start = 0
    for i, b in enumerate(blocks):
        sl = slice(start, start + b.dim)
        G[sl, sl] = b.evolution_block()
        block_of_state[sl] = i
        if b.kind == "regression":
            for j, name in enumerate(b.columns):
                reg_rows.append((start + j, name, b.targets))
        else:
            F[start, list(b.targets)] = 1.0
        start += b.dim
    discounts = np.array([b.discount for b in blocks])
    model = StateModel(blocks, k, family, G, F, block_of_state, discounts, {}, tuple(reg_rows))
    if covariates is not None or reg_rows:
        model = model.with_covariates(covariates or {})
    return model


@njit
def _symmetrize(A):
    return 0.5 * (A + A.T)


@njit
def _discount_inflate(P, block_of_state, discounts):
    """W from the evolved covariance P: ((1-d)/d) * P on each diagonal block."""
    p = P.shape[0]
    W = np.zeros((p, p))
    for i in range(p):
        bi = block_of_state[i]
        for j in range(p):
            if block_of_state[j] == bi:
                d = discounts[bi]
                W[i, j] = (1.0 - d) / d * P[i, j]
    return W


@njit
def _evolve_kernel(m, C, G, block_of_state, discounts):
    a = G @ m
    P = _symmetrize(G @ C @ G.T)
    R = _symmetrize(P + _discount_inflate(P, block_of_state, discounts))
    return a, R


def _as_cov(C, p):
    C = np.asarray(C, dtype=float)
    if C.shape != (p, p):
        raise ConfigurationError(f"expected a {p}x{p} covariance, got shape {C.shape}")
    return C


def discount_W(C_prev, model: StateModel, t: int = 0):
    C = _as_cov(C_prev, model.p)
    P = _symmetrize(model.G @ C @ model.G.T)
    return _symmetrize(_discount_inflate(P, model.block_of_state, model.discounts))


def evolve(m_prev, C_prev, model: StateModel, t: int = 0):
    m = np.asarray(m_prev, dtype=float)
    if m.shape != (model.p,):
        raise ConfigurationError(f"state mean has shape {m.shape}, expected ({model.p},)")
    C = _as_cov(C_prev, model.p)
    return _evolve_kernel(m, np.ascontiguousarray(C), model.G,
                          model.block_of_state, model.discounts)


def predictor_prior(a, R, model: StateModel, t: int = 0):
    F = model.F(t)
    f = F.T @ a
    Q = F.T @ R @ F
    return f, 0.5 * (Q + Q.T)


@njit
def floored_eigh(S):
    """Eigen-decomposition with eigenvalues raised to EIG_FLOOR * trace."""
    S = _symmetrize(S)
    w, V = np.linalg.eigh(S)
    tr = 0.0
    for i in range(S.shape[0]):
        tr += S[i, i]
    floor = EIG_FLOOR * abs(tr)
    if floor == 0.0:
        floor = EIG_FLOOR
    for i in range(w.shape[0]):
        if w[i] < floor:
            w[i] = floor
    return w, V


@njit
def floored_solve(S, B):
    """Solve S X = B for symmetric S after flooring its spectrum."""
    w, V = floored_eigh(S)
    return V @ ((V.T @ B) / w.reshape(-1, 1))
