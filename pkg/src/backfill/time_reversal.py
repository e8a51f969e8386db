"""Time reversal of linear-Gaussian diffusions and backward ensemble simulation.

A forward diffusion ``dx = (F x + f) dt + G dW`` whose marginal at time t is
N(m_t, S_t) runs backward in time with drift

    -(F x + f) + G G' * score,      score = -S_t^{-1} (x - m_t),

and the same diffusion coefficient.  Drifts here are always written for the
reversed clock (d/ds with s running from the end of the grid to its start)
and indexed by calendar grid position.

Two choices configure the reversal of a Kalman-Bucy run:

``diffusion="gain"``
    G_t = P_t (K^-1 H)', the coefficient of the filter-mean SDE.  This reverses
    the conditional-mean process itself.
``diffusion="signal"``
    G_t = C_t, the signal noise.  Together with the filter law N(Xhat_t, P_t)
    this is the backward sampler of the signal given the observations (the
    continuous limit of forward-filtering/backward-sampling), which is what
    produces calibrated backfill ensembles.

``law_cov_source`` picks the Gaussian density whose score is used:
``"filter"`` is N(Xhat_t, P_t); ``"mean-law"`` is the unconditional law of the
filter mean, N(E Xhat_t, Cov Xhat_t) with Cov Xhat_t = Cov X_t - P_t.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from . import _rng
from .errors import InvalidInputError, SingularCovarianceError
from .forward_filter import FilterTrajectory
from .sde_core import LinearModelSpec, PathSample, TimeGrid

REG_EPS = 1e-10
LAW_SOURCES = ("filter", "mean-law")
DIFFUSIONS = ("gain", "signal")


@dataclass(frozen=True)
class FilterLaw:
    """Gaussian law N(means[k], covs[k]) at every grid point."""

    grid: TimeGrid
    means: np.ndarray
    covs: np.ndarray


def filter_mean_law(model: LinearModelSpec, filt: FilterTrajectory,
                    mean_cov0: Optional[np.ndarray] = None) -> FilterLaw:
    """Unconditional mean and covariance of the Euler filter-mean recursion.

    ``Xhat_{k+1} = Xhat_k + (A Xhat_k + D u_k) dt + G_k dB`` with ``dB`` white;
    ``mean_cov0`` is the spread of ``Xhat_0`` (zero when the filter starts
    from a known prior mean).
    """
    grid = filt.grid
    cf = model.coefficients(grid)
    n, dt = model.n, grid.dt
    G = _gain_diffusion(model, filt)
    m = filt.means[0].copy()
    V = np.zeros((n, n)) if mean_cov0 is None else np.atleast_2d(np.asarray(mean_cov0, dtype=float))
    means = np.empty((len(grid), n))
    covs = np.empty((len(grid), n, n))
    means[0], covs[0] = m, V
    eye = np.eye(n)
    for j in range(grid.n_steps):
        M = eye + cf.A[j] * dt
        m = M @ m + cf.D[j] @ cf.u[j] * dt
        V = M @ V @ M.T + G[j] @ G[j].T * dt
        V = 0.5 * (V + V.T)
        means[j + 1], covs[j + 1] = m, V
    return FilterLaw(grid, means, covs)


def _gain_diffusion(model: LinearModelSpec, filt: FilterTrajectory) -> np.ndarray:
    cf = model.coefficients(filt.grid)
    Kinv_H = np.linalg.solve(cf.K, cf.H)                       # (N+1, p, n)
    return np.einsum("jab,jcb->jac", filt.covs, Kinv_H)        # P (K^-1 H)'


def reverse_linear_drift(F: np.ndarray, f: np.ndarray, a: np.ndarray, law: FilterLaw
                         ) -> tuple[np.ndarray, np.ndarray]:
    """Reverse ``F x + f`` against ``law`` with diffusion covariance ``a``.

    Returns ``(-F - a S^-1, -f + a S^-1 m)`` per grid point.  ``S`` is
    regularized by ``eps I`` with ``eps = 1e-10 trace(S) / n``.
    """
    n = F.shape[-1]
    times = law.grid.times
    F_rev = -np.array(F, dtype=float)
    f_rev = -np.array(f, dtype=float)
    for k in range(F.shape[0]):
        if not np.any(a[k]):
            continue
        S = law.covs[k]
        tr = np.trace(S)
        if not tr > 0:
            raise SingularCovarianceError(float(times[k]))
        S_reg = S + REG_EPS * tr / n * np.eye(n)
        try:
            cho = linalg.cho_factor(S_reg, lower=True)
        except linalg.LinAlgError:
            raise SingularCovarianceError(float(times[k])) from None
        a_Sinv = linalg.cho_solve(cho, a[k].T).T                 # a S^-1 (a and S symmetric)
        F_rev[k] -= a_Sinv
        f_rev[k] += a_Sinv @ law.means[k]
    return F_rev, f_rev


@dataclass(frozen=True)
class ReversedModel:
    """Linear SDE in the reversed clock: ``dx = (F_k x + f_k) ds + G_k dW``.

    Index ``k`` is the calendar grid position; simulation runs from the last
    grid point to the first.
    """

    grid: TimeGrid
    drift_matrix: np.ndarray    # (N+1, n, n)
    drift_offset: np.ndarray    # (N+1, n)
    diffusion: np.ndarray       # (N+1, n, r)
    law: Optional[FilterLaw] = None

    def __post_init__(self):
        N1 = len(self.grid)
        n = self.drift_matrix.shape[-1]
        if (self.drift_matrix.shape != (N1, n, n) or self.drift_offset.shape != (N1, n)
                or self.diffusion.shape[:2] != (N1, n)):
            raise InvalidInputError("reversed model arrays do not match the grid")
        if not np.all(np.isfinite(self.diffusion)):
            raise InvalidInputError("diffusion coefficient has non-finite entries")

    @property
    def n(self) -> int:
        return self.drift_matrix.shape[-1]

    @property
    def diffusion_cov(self) -> np.ndarray:
        return np.einsum("kab,kcb->kac", self.diffusion, self.diffusion)

    def drift_at(self, k: int, x: np.ndarray) -> np.ndarray:
        return x @ self.drift_matrix[k].T + self.drift_offset[k]

    def drift(self, t: float, x) -> np.ndarray:
        """Reversed-clock drift at calendar time ``t`` (left grid sample)."""
        return self.drift_at(self.grid.index_floor(t), np.asarray(x, dtype=float))

    def reversed(self, law: FilterLaw) -> "ReversedModel":
        """Reverse again against ``law``; with the same law this undoes the reversal."""
        F, f = reverse_linear_drift(self.drift_matrix, self.drift_offset, self.diffusion_cov, law)
        return ReversedModel(self.grid, F, f, self.diffusion, law)

    @classmethod
    def from_forward(cls, grid: TimeGrid, F, f, G, law: FilterLaw) -> "ReversedModel":
        """Reverse the forward SDE ``dx = (F x + f) dt + G dW`` against ``law``."""
        N1 = len(grid)
        F = np.broadcast_to(np.asarray(F, dtype=float), (N1, *np.shape(F)[-2:])).copy()
        f = np.broadcast_to(np.asarray(f, dtype=float), (N1, F.shape[-1])).copy()
        G = np.broadcast_to(np.asarray(G, dtype=float), (N1, F.shape[-1], np.shape(G)[-1])).copy()
        a = np.einsum("kab,kcb->kac", G, G)
        F_rev, f_rev = reverse_linear_drift(F, f, a, law)
        return cls(grid, F_rev, f_rev, G, law)


def build_reversed_model(model: LinearModelSpec, filt: FilterTrajectory,
                         law_cov_source: str = "filter", diffusion: str = "gain",
                         mean_cov0: Optional[np.ndarray] = None) -> ReversedModel:
    """Time-reversed dynamics of a Kalman-Bucy run (see module docstring)."""
    if law_cov_source not in LAW_SOURCES:
        raise InvalidInputError(f"law_cov_source must be one of {LAW_SOURCES}")
    if diffusion not in DIFFUSIONS:
        raise InvalidInputError(f"diffusion must be one of {DIFFUSIONS}")
    grid = filt.grid
    cf = model.coefficients(grid)
    if law_cov_source == "filter":
        law = FilterLaw(grid, filt.means, filt.covs)
    else:
        law = filter_mean_law(model, filt, mean_cov0)
    G = _gain_diffusion(model, filt) if diffusion == "gain" else cf.C
    f = np.einsum("jnk,jk->jn", cf.D, cf.u)
    return ReversedModel.from_forward(grid, cf.A, f, G, law)


@dataclass(frozen=True)
class Ensemble:
    """Monte Carlo paths on a calendar grid, shape ``(n_paths, N+1, n)``."""

    grid: TimeGrid
    paths: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    def path(self, i: int) -> PathSample:
        return PathSample(self.grid, self.paths[i])

    def mean(self) -> np.ndarray:
        return self.paths.mean(axis=0)

    def quantiles(self, qs) -> np.ndarray:
        """Per-time quantiles, shape ``(len(qs), N+1, n)``."""
        return np.quantile(self.paths, qs, axis=0)


def _start_array(start, n_paths: int, n: int) -> np.ndarray:
    s = np.asarray(start, dtype=float)
    if s.shape == (n,) or s.size == n:
        return np.broadcast_to(s.reshape(n), (n_paths, n)).copy()
    if s.shape != (n_paths, n):
        raise InvalidInputError(f"start must have shape ({n},) or ({n_paths}, {n}), got {s.shape}")
    return s.copy()


def sample_gaussian_starts(mean, cov, n_paths: int, seed: int) -> np.ndarray:
    """``n_paths`` draws from N(mean, cov); cov may be singular."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    w, V = np.linalg.eigh(0.5 * (cov + cov.T))
    root = V * np.sqrt(np.clip(w, 0.0, None))
    z = _rng.stream(seed, _rng.START).standard_normal((n_paths, mean.size))
    return mean + z @ root.T


def simulate_backfill(reversed_model: ReversedModel, start, target_time: float, n_paths: int,
                      seed: int) -> Ensemble:
    """Euler-Maruyama from the end of the grid back to ``target_time``.

    ``start`` is an n-vector shared by all paths or an ``(n_paths, n)`` array.
    Path ``i`` uses noise stream ``(seed, REVERSAL, i)``.
    """
    rm = reversed_model
    grid = rm.grid
    if not target_time < grid.t_end:
        raise InvalidInputError(f"target_time {target_time} must precede {grid.t_end}")
    i0 = grid.index_of(target_time)
    N = grid.n_steps
    n, r = rm.n, rm.diffusion.shape[-1]
    dt = grid.dt
    x = _start_array(start, n_paths, n)
    dW = _rng.path_normals(seed, _rng.REVERSAL, n_paths, (N - i0, r)) * np.sqrt(dt)
    out = np.empty((n_paths, N - i0 + 1, n))
    out[:, -1] = x
    for step, k in enumerate(range(N, i0, -1)):
        x = x + rm.drift_at(k, x) * dt + dW[:, step] @ rm.diffusion[k].T
        out[:, k - 1 - i0] = x
    return Ensemble(grid.subgrid(i0, N) if i0 > 0 else grid, out)
