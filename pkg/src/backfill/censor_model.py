"""Poisson tick times and the censoring map.

Before the liquidity time ``T`` the price is only seen at the jump times of a
homogeneous Poisson process; from ``T`` up to the observer time ``T0`` it is
seen at every grid point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _rng
from .errors import InvalidInputError
from .sde_core import PathSample


@dataclass(frozen=True)
class CensorSpec:
    intensity: float
    liquidity_time: float
    observer_time: float

    def __post_init__(self):
        if self.intensity < 0:
            raise InvalidInputError(f"intensity must be >= 0, got {self.intensity}")
        if not self.observer_time > self.liquidity_time >= 0:
            raise InvalidInputError(
                f"need T0 > T >= 0, got T={self.liquidity_time}, T0={self.observer_time}")


@dataclass(frozen=True)
class CensoredSeries:
    """Sparse ticks before ``T`` plus the dense record on ``[T, T0]``.

    ``tick_times`` are the raw Poisson times; ``tick_values[i]`` is the path
    value at the greatest grid time <= ``tick_times[i]``.
    """

    tick_times: np.ndarray
    tick_values: np.ndarray
    dense: PathSample

    def __post_init__(self):
        t = np.asarray(self.tick_times, dtype=float)
        if t.size and (np.any(np.diff(t) <= 0) or t[-1] >= self.dense.grid.t_start):
            raise InvalidInputError("tick times must be strictly increasing and before T")

    @property
    def n_ticks(self) -> int:
        return len(self.tick_times)

    @property
    def ticks(self) -> list[tuple[float, np.ndarray]]:
        return list(zip(self.tick_times.tolist(), self.tick_values))


@dataclass(frozen=True)
class BenchmarkSeries:
    """Fully observed benchmark values on the whole horizon."""

    path: PathSample

    def __post_init__(self):
        if not np.all(np.isfinite(self.path.values)):
            raise InvalidInputError("benchmarks must have no missing values")


def sample_poisson_times(spec: CensorSpec, seed: int) -> np.ndarray:
    """Sorted jump times of a rate-``intensity`` Poisson process on ``[0, T)``."""
    T = spec.liquidity_time
    if spec.intensity == 0 or T == 0:
        return np.empty(0)
    rng = _rng.stream(seed, _rng.TICKS)
    count = rng.poisson(spec.intensity * T)
    times = np.sort(rng.uniform(0.0, T, size=count))
    # uniform() is half-open, duplicates have probability zero
    return np.unique(times)


def apply_censoring(eta: PathSample, spec: CensorSpec, seed: int) -> CensoredSeries:
    """Split a true path into Poisson ticks before ``T`` and the dense tail."""
    grid = eta.grid
    start_needed = 0.0 if spec.intensity > 0 else spec.liquidity_time
    if grid.t_start > start_needed + 1e-12 or grid.t_end < spec.observer_time - 1e-9:
        raise InvalidInputError(
            f"path covers [{grid.t_start}, {grid.t_end}], need [{start_needed}, {spec.observer_time}]")
    i_T = grid.index_of(spec.liquidity_time)
    i_T0 = grid.index_of(spec.observer_time)
    times = sample_poisson_times(spec, seed)
    idx = np.array([grid.index_floor(t) for t in times], dtype=int)
    values = eta.values[idx] if idx.size else np.empty((0, eta.dim))
    return CensoredSeries(times, values, eta.restrict(i_T, i_T0))
