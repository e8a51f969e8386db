"""End-to-end runs: simulate, censor, filter, reverse, condition.

The data model
--------------
The latent price ``X`` is an OU process.  Before the liquidity time ``T`` only
Poisson ticks of ``X`` are recorded; on ``[T, T0]`` every grid value is.
Optional benchmarks are noisy copies ``X + s * eps`` on the whole horizon.

The filter runs on ``[0, T0]``.  Level records enter as observation channels
``dY = z dt``: the dense window with a small noise scale ``kappa`` (switched
on at ``T``), each benchmark with scale ``s * sqrt(dt)``, which is the
white-noise equivalent of independent level noise of size ``s`` per grid
point.  Ticks do not enter the filter; they are imposed afterwards as
anchors of the backward sampler.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .. import _rng
from ..censor_model import CensoredSeries, CensorSpec, apply_censoring
from ..conditioning import (AnchorSet, BridgeSpec, ConditionedEnsemble, conditioned_start_law,
                            relax_paths, simulate_conditioned_backfill)
from ..errors import InvalidInputError
from ..forward_filter import (FilterTrajectory, GaussianState, OUCalibration, OUTemplate,
                              calibrate_linear_model, run_kalman_bucy)
from ..sde_core import (LinearModelSpec, MatrixFunction, PathSample, TimeGrid, make_uniform_grid,
                        simulate_linear_signal)
from ..time_reversal import build_reversed_model, sample_gaussian_starts, simulate_backfill
from . import io
from .baselines import BASELINES
from .config import STOCHASTIC_METHODS, RunConfig

QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)
BACKFILL_HEADER = ("time", "mean", "median", "q05", "q25", "q75", "q95")


@dataclass(frozen=True)
class Inputs:
    """What the backfill is allowed to see."""

    grid: TimeGrid                   # [0, T0]
    censored: CensoredSeries
    benchmarks: Optional[np.ndarray] = None   # (N+1, D)

    @property
    def i_liquidity(self) -> int:
        return self.grid.index_of(self.censored.dense.grid.t_start)


@dataclass(frozen=True)
class Simulation:
    truth: PathSample
    inputs: Inputs


@dataclass(frozen=True)
class BackfillResult:
    method: str
    grid: TimeGrid                   # [0, T]
    point: np.ndarray                # (N_T+1,)
    quantiles: Optional[np.ndarray]  # (5, N_T+1) for ensemble methods
    paths: Optional[np.ndarray] = None
    conditioned: Optional[ConditionedEnsemble] = None
    calibration: Optional[OUCalibration] = None

    def bands(self) -> np.ndarray:
        """Rows mean, median, q05, q25, q75, q95."""
        if self.quantiles is None:
            q = np.tile(self.point, (5, 1))
        else:
            q = self.quantiles
        return np.vstack([self.point, q[2], q[0], q[1], q[3], q[4]])


def ou_model(a: float, c: float) -> LinearModelSpec:
    return LinearModelSpec(A=[[a]], C=[[c]], H=[[1.0]], K=[[1.0]])


def simulate(cfg: RunConfig) -> Simulation:
    """Truth, ticks, dense window and benchmarks for one seeded scenario."""
    grid = make_uniform_grid(0.0, cfg.observer_time, cfg.n_steps)
    if cfg.x0 == "stationary":
        sd = cfg.c / np.sqrt(-2.0 * cfg.a)
        x0 = sd * _rng.stream(cfg.seed, _rng.INITIAL).standard_normal()
    else:
        x0 = float(cfg.x0)
    truth = simulate_linear_signal(ou_model(cfg.a, cfg.c), [x0], grid, cfg.seed)
    spec = CensorSpec(cfg.intensity, cfg.liquidity_time, cfg.observer_time)
    censored = apply_censoring(truth, spec, cfg.seed)
    bench = None
    if cfg.benchmarks:
        noise = _rng.stream(cfg.seed, _rng.BENCHMARK).standard_normal((len(grid), cfg.benchmarks))
        bench = truth.values + cfg.benchmark_noise * noise
    return Simulation(truth, Inputs(grid, censored, bench))


def write_simulation(sim: Simulation, out) -> list[Path]:
    out = Path(out)
    inp = sim.inputs
    c = inp.censored
    files = [
        io.write_csv(out / "truth.csv", ("time", "value"), (sim.truth.times, sim.truth.values[:, 0])),
        io.write_csv(out / "ticks.csv", ("time", "value"), (c.tick_times, c.tick_values.reshape(-1))),
        io.write_csv(out / "dense.csv", ("time", "value"), (c.dense.times, c.dense.values[:, 0])),
    ]
    if inp.benchmarks is not None:
        D = inp.benchmarks.shape[1]
        files.append(io.write_csv(out / "benchmarks.csv", ["time"] + [f"b{d}" for d in range(D)],
                                  [inp.grid.times] + [inp.benchmarks[:, d] for d in range(D)]))
    return files


def load_inputs(data_dir) -> Inputs:
    """Read ``ticks.csv``, ``dense.csv`` and, if present, ``benchmarks.csv``."""
    data_dir = Path(data_dir)
    _, dense = io.read_csv(data_dir / "dense.csv")
    _, ticks = io.read_csv(data_dir / "ticks.csv")
    if dense.shape[0] < 2:
        raise InvalidInputError(f"{data_dir / 'dense.csv'}: need at least two rows")
    t_dense = dense[:, 0]
    dt = float(np.mean(np.diff(t_dense)))
    if np.max(np.abs(np.diff(t_dense) - dt)) > 1e-9 * max(1.0, t_dense[-1]):
        raise InvalidInputError("dense window is not on a uniform grid")
    T, T0 = float(t_dense[0]), float(t_dense[-1])
    n_steps = int(round(T0 / dt))
    grid = make_uniform_grid(0.0, T0, n_steps)
    i_T = grid.index_of(T, tol=1e-6)
    window = PathSample(grid.subgrid(i_T, n_steps), dense[:, 1])
    tick_times = ticks[:, 0]
    idx = np.array([grid.index_floor(t) for t in tick_times], dtype=int)
    if idx.size and (tick_times[0] < 0 or idx[-1] >= i_T):
        raise InvalidInputError("tick times must lie in [0, T)")
    censored = CensoredSeries(tick_times, ticks[:, 1:2], window)
    bench = None
    bpath = data_dir / "benchmarks.csv"
    if bpath.exists():
        _, b = io.read_csv(bpath)
        if b.shape[0] != len(grid) or np.max(np.abs(b[:, 0] - grid.times)) > 1e-9 * max(1.0, T0):
            raise InvalidInputError(f"{bpath}: times do not match the grid [0, {T0}] step {dt}")
        bench = b[:, 1:]
    return Inputs(grid, censored, bench)


def _levels(inputs: Inputs) -> np.ndarray:
    out = np.zeros(len(inputs.grid))
    out[inputs.i_liquidity:] = inputs.censored.dense.values[:, 0]
    return out


def filter_setup(cfg: RunConfig, inputs: Inputs
                 ) -> tuple[LinearModelSpec, PathSample, GaussianState, Optional[OUCalibration]]:
    """Model, stacked observation path and prior for the Kalman-Bucy run."""
    grid = inputs.grid
    dt = grid.dt
    calib = None
    a, c = cfg.a, cfg.c
    if cfg.calibrate:
        calib = calibrate_linear_model(inputs.censored.dense, OUTemplate(kappa=cfg.kappa))
        a, c = calib.a, calib.c
    i_T = inputs.i_liquidity
    on = (np.arange(len(grid)) >= i_T).astype(float)
    H_rows = [on]
    K_diag = [cfg.kappa]
    levels = [_levels(inputs)]
    if inputs.benchmarks is not None and cfg.use_benchmarks:
        for d in range(inputs.benchmarks.shape[1]):
            H_rows.append(np.ones(len(grid)))
            K_diag.append(cfg.benchmark_noise * np.sqrt(dt))
            levels.append(inputs.benchmarks[:, d])
    H = MatrixFunction(np.stack(H_rows, axis=1)[:, :, None], grid)
    model = LinearModelSpec(A=[[a]], C=[[c]], H=H, K=np.diag(K_diag))
    # increment over step j is the left level times dt; masked entries are zero
    Z = np.stack(levels, axis=1) * np.stack(H_rows, axis=1)
    Y = np.vstack([np.zeros((1, Z.shape[1])), np.cumsum(Z[:-1] * dt, axis=0)])
    if a < 0:
        prior = GaussianState([0.0], [[c * c / (-2.0 * a)]])
    else:
        z = inputs.censored.dense.values[:, 0]
        prior = GaussianState([z.mean()], [[max(z.var(), c * c * grid.t_end)]])
    return model, PathSample(grid, Y), prior, calib


def run_filter(cfg: RunConfig, inputs: Inputs) -> tuple[FilterTrajectory, LinearModelSpec,
                                                          Optional[OUCalibration]]:
    model, obs, prior, calib = filter_setup(cfg, inputs)
    filt, _ = run_kalman_bucy(model, obs, prior)
    return filt, model, calib


def anchors_of(inputs: Inputs) -> AnchorSet:
    c = inputs.censored
    return AnchorSet(c.tick_times, c.tick_values)


def backfill(cfg: RunConfig, inputs: Inputs) -> BackfillResult:
    """Backfill the censored window ``[0, T]`` with ``cfg.method``."""
    grid = inputs.grid
    i_T = inputs.i_liquidity
    window = grid.subgrid(0, i_T)
    c = inputs.censored
    if cfg.method not in STOCHASTIC_METHODS:
        first = (float(c.dense.times[0]), float(c.dense.values[0, 0]))
        tick_t = grid.times[[grid.index_floor(t) for t in c.tick_times]] if c.n_ticks else c.tick_times
        fill = BASELINES[cfg.method]
        kwargs = {"degree": cfg.poly_degree} if cfg.method == "polynomial" else {}
        point = fill(window.times, tick_t, c.tick_values.reshape(-1), first, **kwargs)
        return BackfillResult(cfg.method, window, point, None)

    filt, model, calib = run_filter(cfg, inputs)
    rm = build_reversed_model(model, filt, law_cov_source="filter", diffusion="signal")
    anchors = anchors_of(inputs)
    terminal = filt.terminal
    conditioned = None
    if cfg.method == "optimal-conditioned":
        spec = BridgeSpec(rm, anchors, eps_hit=cfg.eps_hit)
        law = conditioned_start_law(spec, terminal)
        starts = sample_gaussian_starts(law.mean, law.cov, cfg.n_paths, cfg.seed)
        conditioned = simulate_conditioned_backfill(spec, starts, cfg.n_paths, cfg.seed)
        paths = conditioned.paths
    else:
        starts = sample_gaussian_starts(terminal.mean, terminal.cov, cfg.n_paths, cfg.seed)
        paths = simulate_backfill(rm, starts, grid.t_start, cfg.n_paths, cfg.seed).paths
        if cfg.method == "interp-relaxed" and len(anchors):
            paths = relax_paths(paths, grid, anchors, left="hold", right=float(grid.times[i_T]))
    x = paths[:, :i_T + 1, 0]
    return BackfillResult(cfg.method, window, x.mean(axis=0), np.quantile(x, QUANTILES, axis=0),
                          paths=x, conditioned=conditioned, calibration=calib)


def write_backfill(result: BackfillResult, out, save_paths: bool = False) -> list[Path]:
    out = Path(out)
    b = result.bands()
    files = [io.write_csv(out / f"backfill_{result.method}.csv", BACKFILL_HEADER,
                          [result.grid.times] + list(b))]
    if save_paths and result.paths is not None:
        P = result.paths
        files.append(io.write_csv(out / f"paths_{result.method}.csv",
                                  ["time"] + [f"p{i}" for i in range(P.shape[0])],
                                  [result.grid.times] + list(P)))
    ce = result.conditioned
    if ce is not None:
        files.append(io.write_report(out / f"anchors_{result.method}.txt", {
            "n_anchors": int(ce.hit_errors.shape[1]),
            "max_hit_error": ce.max_hit_error,
            "eps_hit": float(ce.eps_hit),
            "all_hit": str(bool(np.all(ce.accepted))).lower(),
            "mean_kl": ce.mean_kl,
            "excluded_steps": int(ce.excluded_steps),
        }))
    return files
