"""One-dimensional grid solver for the filtering density and its time reversal.

The density is stored as cell averages on a uniform grid.  Each filter step
is split in two: an explicit conservative finite-volume step of the
Fokker-Planck equation (central drift flux on faces with cell Peclet number
``|b| dx / sigma^2 <= 1``, upwind otherwise)

    dp/dt = -d/dx (b p) + 1/2 d^2/dx^2 (sigma^2 p)      (zero-flux boundaries)

followed by a multiplicative observation update with innovation
``e = dY - pi(h) dt``, ``pi(h) = int h p``.  Two weightings are available:

    linear:       1 + kappa^-2 (h - pi(h)) e
    exponential:  exp(kappa^-2 (h - pi(h)) e - kappa^-2 (h - pi(h))^2 dt / 2)

The linear one is the first-order truncation of the exponential one; its
squared-innovation term makes the variance noisy, so the exponential weight
is the default.  Negative cells are clipped and the mass renormalized.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _rng
from .errors import (FilterDivergenceError, InvalidInputError, ReversalUndefinedError,
                     StabilityBoundError)

P_FLOOR = 1e-12
MASS_FLOOR = 1e-12
STABILITY_FACTOR = 0.4

Fn = Callable[[float, np.ndarray], np.ndarray]


def _const(value: float) -> Fn:
    return lambda t, x: np.full_like(np.asarray(x, dtype=float), value)


@dataclass(frozen=True)
class NonlinearModelSpec:
    """Scalar model ``dX = b(t,X) dt + sigma(t,X) dW``, ``dY = h(t,X) dt + kappa(t) dB``.

    ``drift``, ``diffusion`` and ``obs`` take ``(t, x_array)`` and must be
    vectorized in ``x``.  Floats are accepted for constant coefficients.
    """

    drift: Fn
    diffusion: Fn
    obs: Fn
    kappa: Callable[[float], float]
    sigma_min: float = 1e-6
    lipschitz_bound: float = 1e6

    def __post_init__(self):
        for name in ("drift", "diffusion", "obs"):
            value = getattr(self, name)
            if not callable(value):
                object.__setattr__(self, name, _const(float(value)))
        if not callable(self.kappa):
            k = float(self.kappa)
            object.__setattr__(self, "kappa", lambda t: k)

    def validate(self, x: np.ndarray, t: float) -> None:
        """Check the regularity assumptions on the grid points ``x`` at time ``t``."""
        if self.kappa(t) == 0:
            raise InvalidInputError(f"kappa({t}) is zero")
        sig = np.abs(self.diffusion(t, x))
        if np.min(sig) < self.sigma_min:
            raise InvalidInputError(f"diffusion below sigma_min={self.sigma_min} at t={t}")
        dx = np.diff(x)
        for name in ("drift", "diffusion"):
            slope = np.abs(np.diff(getattr(self, name)(t, x))) / dx
            if np.max(slope) > self.lipschitz_bound:
                raise InvalidInputError(f"{name} Lipschitz constant exceeds {self.lipschitz_bound}")


@dataclass(frozen=True)
class DensityGrid:
    """Cell-average density on ``n_cells`` equal cells covering ``[x_min, x_max]``."""

    x_min: float
    x_max: float
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size < 3:
            raise InvalidInputError("density needs a 1-D array of at least 3 cells")
        if not self.x_max > self.x_min:
            raise InvalidInputError("x_max must exceed x_min")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise InvalidInputError("density values must be finite and non-negative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_cells(self) -> int:
        return self.values.size

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def x(self) -> np.ndarray:
        """Cell midpoints."""
        return self.x_min + self.dx * (np.arange(self.n_cells) + 0.5)

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.dx)

    def normalized(self) -> "DensityGrid":
        m = self.mass
        if m < MASS_FLOOR:
            raise FilterDivergenceError(f"density mass {m:.3e} below {MASS_FLOOR:.0e}")
        return DensityGrid(self.x_min, self.x_max, self.values / m)

    def with_values(self, values: np.ndarray) -> "DensityGrid":
        return DensityGrid(self.x_min, self.x_max, values)

    def expect(self, f: np.ndarray) -> float:
        """Integral of ``f * p`` for ``f`` sampled at the midpoints."""
        return float(np.sum(f * self.values) * self.dx)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draws from the piecewise-constant density."""
        w = self.values / self.values.sum()
        cells = rng.choice(self.n_cells, size=n, p=w)
        return self.x_min + self.dx * (cells + rng.uniform(size=n))

    @classmethod
    def from_function(cls, fn: Callable[[np.ndarray], np.ndarray], x_min: float, x_max: float,
                      n_cells: int) -> "DensityGrid":
        dx = (x_max - x_min) / n_cells
        x = x_min + dx * (np.arange(n_cells) + 0.5)
        return cls(x_min, x_max, fn(x)).normalized()

    @classmethod
    def gaussian(cls, mean: float, var: float, n_cells: int, width_sd: float = 8.0) -> "DensityGrid":
        """Normal(mean, var) on ``mean +- width_sd`` standard deviations."""
        sd = np.sqrt(var)
        return cls.from_function(lambda x: np.exp(-0.5 * (x - mean) ** 2 / var),
                                 mean - width_sd * sd, mean + width_sd * sd, n_cells)


def stability_bound(p: DensityGrid, model: NonlinearModelSpec, t: float) -> float:
    """Largest explicit step: the diffusive limit, tightened by the advective CFL limit.

    The advective limit ``dx / max|b|`` only binds for strong drift on the grid,
    for instance a cubic drift evaluated far out in the tails.
    """
    sig2 = model.diffusion(t, p.x) ** 2
    diffusive = STABILITY_FACTOR * p.dx ** 2 / float(np.max(sig2))
    b_max = float(np.max(np.abs(model.drift(t, p.x))))
    return diffusive if b_max == 0.0 else min(diffusive, p.dx / b_max)


def fokker_planck_step(p: DensityGrid, model: NonlinearModelSpec, t: float, dt: float) -> DensityGrid:
    """One explicit conservative step of the Fokker-Planck equation."""
    dt_max = stability_bound(p, model, t)
    if dt > dt_max * (1 + 1e-12):
        raise StabilityBoundError(dt, dt_max)
    x, dx, v = p.x, p.dx, p.values
    sig2 = model.diffusion(t, x) ** 2
    a = sig2 * v
    b = model.drift(t, x[:-1] + 0.5 * dx)
    # central drift flux where the face is resolved (cell Peclet <= 1), upwind elsewhere
    resolved = np.abs(b) * dx <= np.minimum(sig2[:-1], sig2[1:])
    advective = np.where(resolved, 0.5 * b * (v[:-1] + v[1:]),
                         np.maximum(b, 0.0) * v[:-1] + np.minimum(b, 0.0) * v[1:])
    flux = np.zeros(v.size + 1)
    flux[1:-1] = advective - 0.5 * (a[1:] - a[:-1]) / dx
    new = np.clip(v - dt / dx * (flux[1:] - flux[:-1]), 0.0, None)
    # strong drift can still push tail cells negative; clipping adds mass, so restore it
    total = new.sum()
    if total > 0:
        new *= v.sum() / total
    return p.with_values(new)


def ks_update(p: DensityGrid, model: NonlinearModelSpec, t: float, dt: float, dY: float,
              scheme: str = "exponential") -> DensityGrid:
    """Transport step followed by the multiplicative observation update."""
    q = fokker_planck_step(p, model, t, dt)
    h = model.obs(t, q.x)
    pi_h = q.expect(h)
    k2 = model.kappa(t) ** -2
    centered = h - pi_h
    if scheme == "linear":
        w = 1.0 + k2 * centered * (dY - pi_h * dt)
    elif scheme == "exponential":
        lw = k2 * centered * (dY - pi_h * dt) - 0.5 * k2 * centered ** 2 * dt
        w = np.exp(lw - np.max(lw))
    else:
        raise InvalidInputError(f"unknown update scheme {scheme!r}")
    new = np.clip(q.values * w, 0.0, None)
    mass = new.sum() * q.dx
    if mass < MASS_FLOOR:
        raise FilterDivergenceError(f"density mass {mass:.3e} after update at t={t:.6g}")
    return q.with_values(new / mass)


def density_moments(p: DensityGrid) -> tuple[float, float]:
    """Mean and variance of the piecewise-constant density."""
    x = p.x
    mean = p.expect(x)
    var = p.expect((x - mean) ** 2) + p.dx ** 2 / 12.0
    return mean, var


def _reversed_drift(p: DensityGrid, model: NonlinearModelSpec, t: float, x: np.ndarray):
    xs = p.x
    a = model.diffusion(t, xs) ** 2 * p.values
    da = np.gradient(a, p.dx)
    pv = np.interp(x, xs, p.values)
    ok = (pv >= P_FLOOR) & (x >= xs[0]) & (x <= xs[-1])
    ratio = np.where(ok, np.interp(x, xs, da) / np.where(ok, pv, 1.0), 0.0)
    return -model.drift(t, x) + ratio, ok


def reversed_drift_from_density(p: DensityGrid, model: NonlinearModelSpec, t: float, x: float) -> float:
    """Drift of the time-reversed diffusion, ``-b + d/dx(sigma^2 p) / p``."""
    drift, ok = _reversed_drift(p, model, t, np.array([float(x)]))
    if not ok[0]:
        raise ReversalUndefinedError(f"density below {P_FLOOR:.0e} or off-grid at x={x:.6g}, t={t:.6g}")
    return float(drift[0])


def reversed_drift_array(p: DensityGrid, model: NonlinearModelSpec, t: float,
                         x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized reversed drift; second output flags points where it is defined.

    The score correction is zeroed where the density is below the floor.
    """
    return _reversed_drift(p, model, t, np.asarray(x, dtype=float))


@dataclass(frozen=True)
class DensityTrajectory:
    """Densities stored at ``times`` (uniformly spaced) on a fixed grid."""

    times: np.ndarray
    densities: list[DensityGrid]

    def moments(self) -> np.ndarray:
        return np.array([density_moments(p) for p in self.densities])


def run_density_filter(p0: DensityGrid, model: NonlinearModelSpec, t0: float, dt: float,
                       dY: Optional[np.ndarray] = None, n_steps: Optional[int] = None,
                       store_every: int = 1, scheme: str = "exponential") -> DensityTrajectory:
    """Run ``ks_update`` over observation increments ``dY`` (or pure transport).

    With ``dY=None`` the density is only transported, for ``n_steps`` steps.
    """
    if dY is None:
        if n_steps is None:
            raise InvalidInputError("give either dY or n_steps")
    else:
        dY = np.asarray(dY, dtype=float).ravel()
        n_steps = dY.size
    model.validate(p0.x, t0)
    p = p0.normalized()
    times, out = [t0], [p]
    for j in range(n_steps):
        t = t0 + j * dt
        p = fokker_planck_step(p, model, t, dt) if dY is None else ks_update(p, model, t, dt, dY[j], scheme)
        if (j + 1) % store_every == 0:
            times.append(t0 + (j + 1) * dt)
            out.append(p)
    return DensityTrajectory(np.array(times), out)


@dataclass(frozen=True)
class DensityReversal:
    """Reversed-time ensemble on the stored times of a density trajectory."""

    times: np.ndarray          # calendar times, ascending
    paths: np.ndarray          # (n_paths, n_times)
    flagged: np.ndarray        # (n_paths,) True if a path left the region where p >= floor


def simulate_density_reversal(traj: DensityTrajectory, model: NonlinearModelSpec, n_paths: int,
                              seed: int, start: Optional[np.ndarray] = None) -> DensityReversal:
    """Simulate the reversed SDE from the last stored density back to the first.

    Starts are drawn from the terminal density unless given.
    """
    times = traj.times
    n_t = times.size
    if start is None:
        start = traj.densities[-1].sample(n_paths, _rng.stream(seed, _rng.START))
    x = np.asarray(start, dtype=float).copy()
    dW = _rng.path_normals(seed, _rng.REVERSAL, n_paths, (n_t - 1,))
    paths = np.empty((n_paths, n_t))
    paths[:, -1] = x
    flagged = np.zeros(n_paths, dtype=bool)
    for k in range(n_t - 1, 0, -1):
        h = times[k] - times[k - 1]
        t = times[k]
        drift, ok = reversed_drift_array(traj.densities[k], model, t, x)
        flagged |= ~ok
        x = x + drift * h + model.diffusion(t, x) * np.sqrt(h) * dW[:, n_t - 1 - k]
        paths[:, k - 1] = x
    return DensityReversal(times, paths, flagged)
