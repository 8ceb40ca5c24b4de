"""Conjugate bookkeeping and densities for the Gaussian/NIW emission model
and the Dirichlet-multinomial transition model.

Conventions. Each cluster k carries a Normal-inverse-Wishart prior
(mu0, kappa, Psi, nu) over its Gaussian mean and covariance. With n points
assigned, mean vbar, and scatter S = sum (v - vbar)(v - vbar)^T, the
posterior parameters are

    kappa_k = kappa + n            nu_k  = nu + n
    mu_k    = (kappa mu0 + n vbar) / kappa_k
    Psi_k   = Psi + S + (kappa n / kappa_k)(vbar - mu0)(vbar - mu0)^T

and the posterior predictive for a new point is a multivariate Student-t
with ``dof`` degrees of freedom, mean mu_k, and scale
((kappa_k + 1) / kappa_k) * Psi_k / dof.

Two conventions for ``dof`` are supported. ``paper-literal`` uses
dof = nu_k - K + 1 with K the cluster count; under the default nu = K this
keeps dof = n + 1 positive for any data dimension. ``dimension-corrected``
uses the textbook dof = nu_k - M + 1 with M the data dimension; only in this
mode (or when K = M) is the chained predictive an exact, order-invariant
marginal likelihood.

kappa = 0 makes the posterior mean undefined for empty clusters, so a small
``kappa_floor`` is substituted whenever kappa = 0; it perturbs non-empty
clusters negligibly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gammaln

from .errors import ConfigError, NumericalError

DOF_PAPER_LITERAL = "paper-literal"
DOF_DIMENSION_CORRECTED = "dimension-corrected"
DOF_MODES = (DOF_PAPER_LITERAL, DOF_DIMENSION_CORRECTED)

LOG_PI = math.log(math.pi)


@dataclass(eq=False)
class Hyperparams:
    """Model hyperparameters shared by all clusters.

    Defaults follow ``Hyperparams.defaults``: kappa=0 (floored internally),
    mu0=0, nu=K, Psi=I, alpha=50/K.
    """

    K: int
    M: int
    kappa: float
    nu: float
    mu0: np.ndarray
    Psi: np.ndarray
    alpha: float
    dof_mode: str = DOF_PAPER_LITERAL
    kappa_floor: float = 1e-6

    def __post_init__(self):
        if self.K < 1:
            raise ConfigError(f"cluster count K must be >= 1, got {self.K}")
        if self.M < 1:
            raise ConfigError(f"dimension M must be >= 1, got {self.M}")
        if self.alpha <= 0:
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")
        if self.kappa < 0:
            raise ConfigError(f"kappa must be >= 0, got {self.kappa}")
        if self.kappa_floor <= 0:
            raise ConfigError(f"kappa_floor must be > 0, got {self.kappa_floor}")
        if self.dof_mode not in DOF_MODES:
            raise ConfigError(f"unknown dof_mode {self.dof_mode!r}; "
                              f"expected one of {DOF_MODES}")
        self.mu0 = np.asarray(self.mu0, dtype=np.float64)
        self.Psi = np.asarray(self.Psi, dtype=np.float64)
        if self.mu0.shape != (self.M,):
            raise ConfigError(f"mu0 has shape {self.mu0.shape}, expected ({self.M},)")
        if self.Psi.shape != (self.M, self.M):
            raise ConfigError(f"Psi has shape {self.Psi.shape}, expected "
                              f"({self.M}, {self.M})")
        if not np.allclose(self.Psi, self.Psi.T, atol=1e-10):
            raise ConfigError("Psi must be symmetric")
        try:
            np.linalg.cholesky(self.Psi)
        except np.linalg.LinAlgError:
            raise ConfigError("Psi must be positive definite") from None
        if self.dof_mode == DOF_DIMENSION_CORRECTED and self.nu < self.M:
            raise ConfigError(f"dimension-corrected mode requires nu >= M "
                              f"(nu={self.nu}, M={self.M})")

    @classmethod
    def defaults(cls, K: int, M: int, **overrides) -> Hyperparams:
        params = dict(K=K, M=M, kappa=0.0, nu=float(K), mu0=np.zeros(M),
                      Psi=np.eye(M), alpha=50.0 / K)
        params.update(overrides)
        return cls(**params)

    def effective_kappa(self) -> float:
        return self.kappa if self.kappa > 0 else self.kappa_floor

    def dof_offset(self) -> int:
        """The constant subtracted from nu_k + 1 to form the predictive dof."""
        return self.K if self.dof_mode == DOF_PAPER_LITERAL else self.M


@dataclass(eq=False)
class ClusterStats:
    """Count, vector sum, and raw second moment of a cluster's members."""

    n: int
    sum: np.ndarray       # (M,)
    Q: np.ndarray         # (M, M), sum of outer products v v^T

    @classmethod
    def zeros(cls, dim: int) -> ClusterStats:
        return cls(n=0, sum=np.zeros(dim), Q=np.zeros((dim, dim)))

    def add(self, v: np.ndarray) -> None:
        self.n += 1
        self.sum += v
        self.Q += np.outer(v, v)

    def remove(self, v: np.ndarray) -> None:
        if self.n < 1:
            raise ValueError("cannot remove from empty ClusterStats")
        self.n -= 1
        if self.n == 0:
            # Snap to exact zeros; avoids carrying cancellation dust forward.
            self.sum[:] = 0.0
            self.Q[:] = 0.0
        else:
            self.sum -= v
            self.Q -= np.outer(v, v)

    def mean(self) -> np.ndarray:
        if self.n == 0:
            raise ValueError("mean of empty ClusterStats")
        return self.sum / self.n

    def scatter(self) -> np.ndarray:
        """S = Q - n vbar vbar^T; zero matrix for an empty cluster."""
        if self.n == 0:
            return np.zeros_like(self.Q)
        return self.Q - np.outer(self.sum, self.sum) / self.n

    def copy(self) -> ClusterStats:
        return ClusterStats(n=self.n, sum=self.sum.copy(), Q=self.Q.copy())

    @classmethod
    def from_points(cls, points: np.ndarray) -> ClusterStats:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return cls(n=points.shape[0], sum=points.sum(axis=0),
                   Q=points.T @ points)


@dataclass(eq=False)
class PosteriorParams:
    """Posterior NIW parameters and the derived predictive-t pieces."""

    kappa_k: float
    nu_k: float
    mu_k: np.ndarray
    Psi_k: np.ndarray
    Sigma_k: np.ndarray   # Psi_k / dof
    dof: float


def posterior_params(stats: ClusterStats, h: Hyperparams) -> PosteriorParams:
    """Posterior NIW parameters for a cluster with the given statistics.

    An empty cluster reproduces the prior exactly (with the floored kappa).
    Raises ConfigError if the predictive dof comes out non-positive.
    """
    kappa0 = h.effective_kappa()
    n = stats.n
    if n == 0:
        kappa_k = kappa0
        nu_k = h.nu
        mu_k = h.mu0.copy()
        Psi_k = h.Psi.copy()
    else:
        vbar = stats.sum / n
        kappa_k = kappa0 + n
        nu_k = h.nu + n
        mu_k = (kappa0 * h.mu0 + n * vbar) / kappa_k
        dev = vbar - h.mu0
        Psi_k = h.Psi + stats.scatter() + (kappa0 * n / kappa_k) * np.outer(dev, dev)
    dof = nu_k - h.dof_offset() + 1
    if dof <= 0:
        raise ConfigError(
            f"non-positive predictive dof {dof} (nu_k={nu_k}, "
            f"dof_mode={h.dof_mode!r}); raise nu or switch dof_mode")
    return PosteriorParams(kappa_k=kappa_k, nu_k=nu_k, mu_k=mu_k, Psi_k=Psi_k,
                           Sigma_k=Psi_k / dof, dof=dof)


def _log_t(delta: np.ndarray, chol_scale: np.ndarray, logdet_scale: float,
           dof: float) -> float:
    """Log multivariate-t density at offset delta, given chol of the scale."""
    dim = delta.shape[0]
    y = solve_triangular(chol_scale, delta, lower=True, check_finite=False)
    quad = float(y @ y)
    return (gammaln((dof + dim) / 2.0) - gammaln(dof / 2.0)
            - 0.5 * dim * (math.log(dof) + LOG_PI)
            - 0.5 * logdet_scale
            - 0.5 * (dof + dim) * math.log1p(quad / dof))


def log_predictive_t(v: np.ndarray, p: PosteriorParams) -> float:
    """Log posterior-predictive density of v: multivariate Student-t with
    ``p.dof`` degrees of freedom, mean mu_k, scale ((kappa_k+1)/kappa_k) Sigma_k.
    """
    v = np.asarray(v, dtype=np.float64)
    scale = ((p.kappa_k + 1.0) / p.kappa_k) * p.Sigma_k
    try:
        chol = np.linalg.cholesky(scale)
    except np.linalg.LinAlgError:
        raise NumericalError("predictive scale matrix is not positive definite") from None
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return _log_t(v - p.mu_k, chol, logdet, p.dof)


def cluster_marginal_loglik(points, h: Hyperparams) -> float:
    """Log marginal likelihood of a point set under one cluster's NIW prior.

    Computed by the chain rule: each point is scored under the predictive
    given its predecessors, then absorbed via a rank-1 Cholesky update. In
    dimension-corrected mode (or when K = M) this equals the closed-form NIW
    marginal and is invariant to the order of the points.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.size == 0:
        return 0.0
    dim = h.M
    offset = h.dof_offset()
    kappa = h.effective_kappa()
    nu = h.nu
    mu = h.mu0.astype(np.float64).copy()
    chol = np.linalg.cholesky(h.Psi)
    total = 0.0
    for v in points:
        dof = nu - offset + 1
        if dof <= 0:
            raise ConfigError(f"non-positive predictive dof {dof} "
                              f"(dof_mode={h.dof_mode!r})")
        # Predictive scale is a scalar multiple of the current Psi:
        # Lambda = c * Psi with c = (kappa+1) / (kappa * dof).
        c = (kappa + 1.0) / (kappa * dof)
        delta = v - mu
        y = solve_triangular(chol, delta, lower=True, check_finite=False)
        quad_psi = float(y @ y)
        logdet = dim * math.log(c) + 2.0 * float(np.sum(np.log(np.diag(chol))))
        total += (gammaln((dof + dim) / 2.0) - gammaln(dof / 2.0)
                  - 0.5 * dim * (math.log(dof) + LOG_PI)
                  - 0.5 * logdet
                  - 0.5 * (dof + dim) * math.log1p(quad_psi / (c * dof)))
        # Absorb v: Psi' = Psi + (kappa/(kappa+1)) delta delta^T.
        x = math.sqrt(kappa / (kappa + 1.0)) * delta
        chol = chol_update(chol, x, +1)
        mu = (kappa * mu + v) / (kappa + 1.0)
        kappa += 1.0
        nu += 1.0
    return total


@dataclass(eq=False)
class TransitionCounts:
    """(K+1) x K table of observed state bigrams; row K is the virtual START."""

    K: int
    table: np.ndarray = field(default=None)
    row_totals: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.table is None:
            self.table = np.zeros((self.K + 1, self.K), dtype=np.int64)
        if self.row_totals is None:
            self.row_totals = self.table.sum(axis=1)

    @property
    def start_row(self) -> int:
        return self.K

    def add(self, prev: int, nxt: int) -> None:
        self.table[prev, nxt] += 1
        self.row_totals[prev] += 1

    def remove(self, prev: int, nxt: int) -> None:
        if self.table[prev, nxt] < 1:
            raise ValueError(f"no transition {prev}->{nxt} to remove")
        self.table[prev, nxt] -= 1
        self.row_totals[prev] -= 1

    def total(self) -> int:
        return int(self.row_totals.sum())

    def copy(self) -> TransitionCounts:
        return TransitionCounts(K=self.K, table=self.table.copy(),
                                row_totals=self.row_totals.copy())

    @classmethod
    def from_sequences(cls, sequences, K: int) -> TransitionCounts:
        """Count bigrams over state sequences, each prefixed by virtual START."""
        counts = cls(K=K)
        for seq in sequences:
            prev = counts.start_row
            for s in seq:
                counts.add(prev, int(s))
                prev = int(s)
        return counts


def trans_predictive(nxt: int, prev: int, counts: TransitionCounts,
                     h: Hyperparams) -> float:
    """Additively smoothed transition probability (n(next|prev) + alpha) /
    (n(.|prev) + K alpha), computed from the caller-prepared counts."""
    return ((counts.table[prev, nxt] + h.alpha)
            / (counts.row_totals[prev] + h.K * h.alpha))


def chol_update(L: np.ndarray, x: np.ndarray, sign: int) -> np.ndarray:
    """Rank-1 update (sign=+1) or downdate (sign=-1) of a lower Cholesky factor.

    Returns a new factor L' with L' L'^T = L L^T + sign * x x^T. The input is
    not modified. Raises NumericalError if a downdate loses positive
    definiteness; callers fall back to a full refactorization.
    """
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    L = np.array(L, dtype=np.float64, copy=True)
    x = np.array(x, dtype=np.float64, copy=True)
    m = x.shape[0]
    for k in range(m):
        dkk = L[k, k]
        r2 = dkk * dkk + sign * x[k] * x[k]
        if r2 <= 0.0:
            raise NumericalError("rank-1 downdate lost positive definiteness")
        r = math.sqrt(r2)
        c = r / dkk
        s = x[k] / dkk
        L[k, k] = r
        if k + 1 < m:
            L[k + 1:, k] = (L[k + 1:, k] + sign * s * x[k + 1:]) / c
            x[k + 1:] = c * x[k + 1:] - s * L[k + 1:, k]
    return L
