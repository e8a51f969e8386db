"""Time grids, time-varying coefficients and Euler-Maruyama simulation.

The linear signal/observation system is

    dX = (A(t) X + D(t) u(t)) dt + C(t) dW        (n-dim state, m-dim noise)
    dY = H(t) X dt + K(t) dB                      (p-dim observation)

Coefficients are stored as piecewise-constant samples on the master grid and
evaluated with the left sample between grid points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import linalg

from . import _rng
from .errors import DecompositionError, InvalidInputError

K_COND_MAX = 1e12


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_start = t_0 < ... < t_N = t_end``."""

    t_start: float
    t_end: float
    n_steps: int

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise InvalidInputError(f"t_end ({self.t_end}) must exceed t_start ({self.t_start})")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise InvalidInputError(f"n_steps must be a positive integer, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / self.n_steps

    @property
    def times(self) -> np.ndarray:
        t = self.t_start + self.dt * np.arange(self.n_steps + 1)
        t[-1] = self.t_end
        return t

    def __len__(self) -> int:
        return self.n_steps + 1

    def index_floor(self, t: float) -> int:
        """Index of the greatest grid time <= t (clipped to the grid)."""
        k = int(np.floor((t - self.t_start) / self.dt + 1e-9))
        return min(max(k, 0), self.n_steps)

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        """Index of grid time ``t``; raises if ``t`` is not on the grid."""
        x = (t - self.t_start) / self.dt
        k = int(round(x))
        if abs(x - k) > tol * max(1.0, abs(x)) or not 0 <= k <= self.n_steps:
            raise InvalidInputError(f"time {t} is not a grid point")
        return k

    def subgrid(self, i0: int, i1: int) -> "TimeGrid":
        if not 0 <= i0 < i1 <= self.n_steps:
            raise InvalidInputError(f"bad subgrid indices ({i0}, {i1})")
        times = self.times
        return TimeGrid(float(times[i0]), float(times[i1]), i1 - i0)

    def same_as(self, other: "TimeGrid") -> bool:
        return (self.n_steps == other.n_steps
                and np.isclose(self.t_start, other.t_start, rtol=0, atol=1e-12)
                and np.isclose(self.t_end, other.t_end, rtol=0, atol=1e-12))


def make_uniform_grid(t_start: float, t_end: float, n_steps: int) -> TimeGrid:
    return TimeGrid(float(t_start), float(t_end), int(n_steps))


def _as_matrix(value) -> np.ndarray:
    a = np.asarray(value, dtype=float)
    if a.ndim == 0:
        return a.reshape(1, 1)
    if a.ndim == 1:
        return a.reshape(-1, 1)
    return a


class MatrixFunction:
    """Matrix-valued function of time.

    Either constant, or piecewise-constant samples on a grid (one sample per
    grid point, left-continuous lookup in between).
    """

    def __init__(self, value, grid: Optional[TimeGrid] = None):
        a = np.asarray(value, dtype=float)
        if grid is None:
            self._const = _as_matrix(a)
            self._samples = None
            self.grid = None
            self.shape = self._const.shape
        else:
            if a.ndim == 1:
                a = a.reshape(-1, 1, 1)
            elif a.ndim == 2:
                a = a[:, :, None]
            if a.shape[0] != len(grid):
                raise InvalidInputError(f"need {len(grid)} samples, got {a.shape[0]}")
            self._const = None
            self._samples = a
            self.grid = grid
            self.shape = a.shape[1:]

    @classmethod
    def from_function(cls, fn: Callable[[float], np.ndarray], grid: TimeGrid) -> "MatrixFunction":
        return cls(np.stack([_as_matrix(fn(t)) for t in grid.times]), grid)

    @property
    def is_constant(self) -> bool:
        return self._const is not None

    def __call__(self, t: float) -> np.ndarray:
        if self._const is not None:
            return self._const
        return self._samples[self.grid.index_floor(t)]

    def on_grid(self, grid: TimeGrid) -> np.ndarray:
        """Samples at every point of ``grid``, shape ``(N+1, rows, cols)``."""
        if self._const is not None:
            return np.broadcast_to(self._const, (len(grid), *self.shape)).copy()
        if self.grid.same_as(grid):
            return self._samples.copy()
        return np.stack([self(t) for t in grid.times])

    def __repr__(self):
        kind = "constant" if self.is_constant else f"sampled on {len(self.grid)} points"
        return f"MatrixFunction(shape={self.shape}, {kind})"


def _mf(x) -> MatrixFunction:
    return x if isinstance(x, MatrixFunction) else MatrixFunction(x)


class Coefficients(NamedTuple):
    """Coefficient arrays sampled on a grid (leading axis = grid index)."""

    A: np.ndarray
    C: np.ndarray
    D: np.ndarray
    H: np.ndarray
    K: np.ndarray
    u: np.ndarray


@dataclass(frozen=True)
class LinearModelSpec:
    """Linear-Gaussian signal/observation model.

    Matrices may be given as arrays (constant) or :class:`MatrixFunction`.
    ``control`` maps time to a k-vector; ``None`` means u = 0.
    """

    A: MatrixFunction
    C: MatrixFunction
    H: MatrixFunction
    K: MatrixFunction
    D: Optional[MatrixFunction] = None
    control: Optional[Callable[[float], np.ndarray]] = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("A", "C", "H", "K"):
            object.__setattr__(self, name, _mf(getattr(self, name)))
        if self.D is None:
            object.__setattr__(self, "D", MatrixFunction(np.zeros((self.A.shape[0], 1))))
        else:
            object.__setattr__(self, "D", _mf(self.D))
        n, m, k, p = self.n, self.m, self.k, self.p
        expected = {"A": (n, n), "C": (n, m), "D": (n, k), "H": (p, n), "K": (p, p)}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise InvalidInputError(
                    f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.C.shape[1]

    @property
    def k(self) -> int:
        return self.D.shape[1]

    @property
    def p(self) -> int:
        return self.H.shape[0]

    def control_on_grid(self, grid: TimeGrid) -> np.ndarray:
        if self.control is None:
            return np.zeros((len(grid), self.k))
        u = np.array([np.atleast_1d(np.asarray(self.control(t), dtype=float)) for t in grid.times])
        if u.shape != (len(grid), self.k):
            raise InvalidInputError(f"control returns shape {u.shape[1:]}, expected ({self.k},)")
        return u

    def validate(self, grid: TimeGrid, cond_max: float = K_COND_MAX) -> None:
        """Check that K(t) is invertible (condition number <= cond_max) on the grid."""
        K = self.K.on_grid(grid)
        conds = np.linalg.cond(K)
        bad = np.flatnonzero(~np.isfinite(conds) | (conds > cond_max))
        if bad.size:
            t = grid.times[bad[0]]
            raise InvalidInputError(
                f"K(t) ill-conditioned at t={t:.6g} (cond={conds[bad[0]]:.3e} > {cond_max:.0e})")

    def coefficients(self, grid: TimeGrid) -> Coefficients:
        return Coefficients(self.A.on_grid(grid), self.C.on_grid(grid), self.D.on_grid(grid),
                            self.H.on_grid(grid), self.K.on_grid(grid), self.control_on_grid(grid))


@dataclass(frozen=True)
class PathSample:
    """Values of a vector process at every point of a grid, shape ``(N+1, dim)``."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] != len(self.grid):
            raise InvalidInputError(f"values shape {v.shape} does not match grid of {len(self.grid)} points")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def at(self, t: float) -> np.ndarray:
        """Value at the greatest grid time <= t."""
        return self.values[self.grid.index_floor(t)]

    def restrict(self, i0: int, i1: int) -> "PathSample":
        return PathSample(self.grid.subgrid(i0, i1), self.values[i0:i1 + 1])


def simulate_linear_signal_ensemble(model: LinearModelSpec, x0, grid: TimeGrid, seed: int,
                                    n_paths: int, first_path: int = 0) -> np.ndarray:
    """Euler-Maruyama paths of the signal, shape ``(n_paths, N+1, n)``.

    Path ``i`` uses the noise stream ``(seed, SIGNAL, first_path + i)`` so the
    result for a given path does not depend on ``n_paths``.
    """
    model.validate(grid)
    cf = model.coefficients(grid)
    n, dt, N = model.n, grid.dt, grid.n_steps
    x = np.broadcast_to(np.asarray(x0, dtype=float).reshape(-1, n), (n_paths, n)).copy()
    dW = _rng.path_normals(seed, _rng.SIGNAL, n_paths, (N, model.m), first_path) * np.sqrt(dt)
    out = np.empty((n_paths, N + 1, n))
    out[:, 0] = x
    for j in range(N):
        drift = x @ cf.A[j].T + cf.D[j] @ cf.u[j]
        x = x + drift * dt + dW[:, j] @ cf.C[j].T
        out[:, j + 1] = x
    return out


def simulate_linear_signal(model: LinearModelSpec, x0, grid: TimeGrid, noise_seed: int) -> PathSample:
    """One Euler-Maruyama path ``X_{t+dt} = X_t + (A X_t + D u_t) dt + C dW``."""
    x0 = np.asarray(x0, dtype=float).reshape(model.n)
    return PathSample(grid, simulate_linear_signal_ensemble(model, x0, grid, noise_seed, 1)[0])


def simulate_observation(model: LinearModelSpec, signal: PathSample, noise_seed: int,
                         grid: Optional[TimeGrid] = None) -> PathSample:
    """Observation path with ``Y_0 = 0`` and ``dY = H X dt + K dB``."""
    if grid is not None and not grid.same_as(signal.grid):
        raise InvalidInputError("signal grid does not match requested observation grid")
    grid = signal.grid
    if signal.dim != model.n:
        raise InvalidInputError(f"signal has dim {signal.dim}, model expects {model.n}")
    cf = model.coefficients(grid)
    dt = grid.dt
    dB = _rng.stream(noise_seed, _rng.OBSERVATION).standard_normal((grid.n_steps, model.p)) * np.sqrt(dt)
    X = signal.values
    dY = np.einsum("jpn,jn->jp", cf.H[:-1], X[:-1]) * dt + np.einsum("jpq,jq->jp", cf.K[:-1], dB)
    Y = np.vstack([np.zeros((1, model.p)), np.cumsum(dY, axis=0)])
    return PathSample(grid, Y)


def _cholesky(cov: np.ndarray) -> np.ndarray:
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-12):
        raise DecompositionError("covariance is not symmetric")
    try:
        return linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError as exc:
        raise DecompositionError(f"covariance is not positive definite: {exc}") from None


def gaussian_log_density(mean, cov, x) -> float:
    """log N(x; mean, cov)."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    L = _cholesky(cov)
    z = linalg.solve_triangular(L, x - mean, lower=True)
    n = mean.size
    return float(-0.5 * n * np.log(2 * np.pi) - np.sum(np.log(np.diag(L))) - 0.5 * z @ z)


def gaussian_score(mean, cov, x) -> np.ndarray:
    """Gradient of log N(x; mean, cov) in x, i.e. ``-cov^{-1} (x - mean)``."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    L = _cholesky(cov)
    return -linalg.cho_solve((L, True), x - mean)
