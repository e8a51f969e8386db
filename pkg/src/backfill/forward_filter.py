"""Continuous-time Kalman-Bucy filter.

Covariance:  dP/dt = A P + P A' - P H' (K K')^{-1} H P + C C'   (RK4)
Mean:        dXh   = (A Xh + D u) dt + P (K^{-1} H)' dBbar     (Heun or Euler)
Innovations: dBbar = K^{-1} (dY - H Xh dt)

A grid step is split into equal substeps when the observation gain
``P H' (K K')^{-1} H dt`` exceeds ``MAX_STEP_GAIN`` (stiff, very informative
channels); coefficients and the level ``dY / dt`` are held over the step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRegressionError, InvalidInputError, RiccatiInstabilityError
from .sde_core import LinearModelSpec, PathSample, TimeGrid

SYM_TOL = 1e-10
PSD_TOL = 1e-10
MAX_STEP_GAIN = 0.5


def _project_psd(P: np.ndarray, t: float) -> np.ndarray:
    P = 0.5 * (P + P.T)
    w, V = np.linalg.eigh(P)
    scale = max(1.0, float(np.max(np.abs(w))))
    if w[0] < -PSD_TOL * scale:
        raise RiccatiInstabilityError(t, float(w[0]))
    if w[0] >= 0:
        return P
    w = np.clip(w, 0.0, None)
    return (V * w) @ V.T


@dataclass(frozen=True)
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise InvalidInputError(f"cov shape {cov.shape} does not match mean size {mean.size}")
        if np.max(np.abs(cov - cov.T), initial=0.0) > SYM_TOL * max(1.0, np.max(np.abs(cov))):
            raise InvalidInputError("covariance is not symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", _project_psd(cov, np.nan))


@dataclass(frozen=True)
class FilterTrajectory:
    """Filter mean and covariance at every grid point."""

    grid: TimeGrid
    means: np.ndarray   # (N+1, n)
    covs: np.ndarray    # (N+1, n, n)

    def state(self, k: int) -> GaussianState:
        return GaussianState(self.means[k], self.covs[k])

    @property
    def states(self) -> list[GaussianState]:
        return [self.state(k) for k in range(len(self.grid))]

    @property
    def terminal(self) -> GaussianState:
        return self.state(self.grid.n_steps)


@dataclass(frozen=True)
class InnovationsPath:
    """Innovation increments ``dBbar`` over each grid step, shape ``(N, p)``."""

    grid: TimeGrid
    increments: np.ndarray

    @property
    def path(self) -> PathSample:
        p = self.increments.shape[1]
        return PathSample(self.grid, np.vstack([np.zeros((1, p)), np.cumsum(self.increments, axis=0)]))

    def normalized(self) -> np.ndarray:
        """Increments divided by sqrt(dt); i.i.d. N(0, I) under a correct model."""
        return self.increments / np.sqrt(self.grid.dt)


def _riccati_rhs(P, A, CCt, HtRinvH):
    return A @ P + P @ A.T - P @ HtRinvH @ P + CCt


def _rk4(P, A, CCt, HtRinvH, h):
    k1 = _riccati_rhs(P, A, CCt, HtRinvH)
    k2 = _riccati_rhs(P + 0.5 * h * k1, A, CCt, HtRinvH)
    k3 = _riccati_rhs(P + 0.5 * h * k2, A, CCt, HtRinvH)
    k4 = _riccati_rhs(P + h * k3, A, CCt, HtRinvH)
    return P + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _n_substeps(P, HtRinvH, dt) -> int:
    gain = float(np.max(np.abs(np.linalg.eigvals(P @ HtRinvH)))) * dt
    return max(1, int(np.ceil(gain / MAX_STEP_GAIN)))


def _step(P, x, cf, j, dt, dY=None, scheme="heun"):
    """Advance covariance (and mean if ``dY`` is given) over grid step ``j``."""
    A, H, K = cf.A[j], cf.H[j], cf.K[j]
    CCt = cf.C[j] @ cf.C[j].T
    Kinv = np.linalg.inv(K)
    Kinv_H = Kinv @ H
    HtRinvH = Kinv_H.T @ Kinv_H
    drive = cf.D[j] @ cf.u[j]
    m = _n_substeps(P, HtRinvH, dt)
    h = dt / m
    dB = None if dY is None else np.zeros(H.shape[0])
    for _ in range(m):
        P_next = _rk4(P, A, CCt, HtRinvH, h)
        if dY is not None:
            db = Kinv @ (dY / m - H @ x * h)
            incr = (A @ x + drive) * h + P @ Kinv_H.T @ db
            if scheme == "heun":
                xp = x + incr
                db_p = Kinv @ (dY / m - H @ xp * h)
                incr = 0.5 * (incr + (A @ xp + drive) * h + P_next @ Kinv_H.T @ db_p)
            x = x + incr
            dB += db
        P = P_next
    return P, x, dB


def integrate_riccati(model: LinearModelSpec, P0, grid: TimeGrid) -> np.ndarray:
    """Covariance at every grid point, shape ``(N+1, n, n)``.

    Classical RK4 with coefficients frozen at the left end of each step.
    """
    model.validate(grid)
    cf = model.coefficients(grid)
    n, dt = model.n, grid.dt
    times = grid.times
    P = _project_psd(np.atleast_2d(np.asarray(P0, dtype=float)).reshape(n, n), times[0])
    out = np.empty((len(grid), n, n))
    out[0] = P
    for j in range(grid.n_steps):
        P, _, _ = _step(P, None, cf, j, dt)
        P = _project_psd(P, times[j + 1])
        out[j + 1] = P
    return out


def run_kalman_bucy(model: LinearModelSpec, observations: PathSample, init: GaussianState,
                    mean_scheme: str = "heun") -> tuple[FilterTrajectory, InnovationsPath]:
    """Filter the observation path ``Y`` (cumulative, any offset) on its own grid.

    ``mean_scheme="euler"`` advances the mean with the plain Euler step;
    ``"heun"`` (default) averages the Euler increment with the one evaluated
    at the predicted mean and the next covariance.  Both are driven by the same
    observation increment; innovations are always ``K^-1 (dY - H Xh_k dt)``.
    """
    if mean_scheme not in ("euler", "heun"):
        raise InvalidInputError(f"unknown mean scheme {mean_scheme!r}")
    grid = observations.grid
    if observations.dim != model.p:
        raise InvalidInputError(f"observations have dim {observations.dim}, model expects {model.p}")
    if init.mean.size != model.n:
        raise InvalidInputError(f"initial mean has size {init.mean.size}, model expects {model.n}")
    model.validate(grid)
    cf = model.coefficients(grid)
    dt = grid.dt
    times = grid.times
    dY = np.diff(observations.values, axis=0)
    means = np.empty((len(grid), model.n))
    covs = np.empty((len(grid), model.n, model.n))
    dB = np.empty((grid.n_steps, model.p))
    x = init.mean.copy()
    P = init.cov.copy()
    means[0], covs[0] = x, P
    for j in range(grid.n_steps):
        P, x, dB[j] = _step(P, x, cf, j, dt, dY[j], mean_scheme)
        P = _project_psd(P, times[j + 1])
        means[j + 1], covs[j + 1] = x, P
    return FilterTrajectory(grid, means, covs), InnovationsPath(grid, dB)


@dataclass(frozen=True)
class OUTemplate:
    """Scalar OU signal ``dX = a X dt + c dW`` seen through ``dY = X dt + kappa dB``."""

    kappa: float
    min_points: int = 100


@dataclass(frozen=True)
class OUCalibration:
    a: float
    c: float
    a_se: float
    c_se: float
    kappa: float
    n_points: int

    @property
    def model(self) -> LinearModelSpec:
        return LinearModelSpec(A=[[self.a]], C=[[self.c]], H=[[1.0]], K=[[self.kappa]])


def calibrate_linear_model(dense: PathSample, template: OUTemplate) -> OUCalibration:
    """Fit the scalar OU template to a level series by lagged regression.

    ``x[k+1] = phi x[k] + e`` by least squares, ``a = log(phi) / dt``; ``c`` is
    matched to the residual variance of the exact OU transition.
    """
    x = dense.values[:, 0]
    if x.size < template.min_points:
        raise InvalidInputError(f"need at least {template.min_points} points, got {x.size}")
    dt = dense.grid.dt
    x0, x1 = x[:-1], x[1:]
    sxx = float(x0 @ x0)
    if np.ptp(x) == 0 or sxx == 0:
        raise DegenerateRegressionError("series has no variation")
    phi = float(x0 @ x1) / sxx
    resid = x1 - phi * x0
    s2 = float(resid @ resid) / (x0.size - 1)
    if phi <= 0 or s2 == 0:
        raise DegenerateRegressionError(f"regression degenerate (phi={phi:.3g}, resid var={s2:.3g})")
    a = np.log(phi) / dt
    if abs(a * dt) < 1e-8:
        c2 = s2 / dt
    else:
        c2 = 2 * a * s2 / np.expm1(2 * a * dt)
    c = float(np.sqrt(c2))
    phi_se = np.sqrt(s2 / sxx)
    return OUCalibration(a=float(a), c=c, a_se=float(phi_se / (phi * dt)),
                         c_se=c / np.sqrt(2 * x0.size), kappa=float(template.kappa),
                         n_points=int(x.size))
