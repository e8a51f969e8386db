"""Backfilling censored time series with filtering, time reversal and bridges."""

from .censor_model import (BenchmarkSeries, CensoredSeries, CensorSpec, apply_censoring,
                           sample_poisson_times)
from .conditioning import (AnchorSet, BridgeSpec, ConditionedEnsemble, bridge_drift,
                           conditioned_start_law, girsanov_kl, interpolation_relaxation,
                           relax_paths, simulate_conditioned_backfill)
from .errors import (BackfillError, ConfigError, DecompositionError, DegenerateRegressionError,
                     FilterDivergenceError, InvalidInputError, ReversalUndefinedError,
                     RiccatiInstabilityError, SingularCovarianceError, StabilityBoundError,
                     StepSizeError, UnreachableAnchorError)
from .forward_filter import (FilterTrajectory, GaussianState, InnovationsPath, OUCalibration,
                             OUTemplate, calibrate_linear_model, integrate_riccati,
                             run_kalman_bucy)
from .nonlinear_filter import (DensityGrid, DensityTrajectory, NonlinearModelSpec,
                               density_moments, fokker_planck_step, ks_update,
                               reversed_drift_from_density, run_density_filter,
                               simulate_density_reversal, stability_bound)
from .sde_core import (LinearModelSpec, MatrixFunction, PathSample, TimeGrid,
                       gaussian_log_density, gaussian_score, make_uniform_grid,
                       simulate_linear_signal, simulate_observation)
from .time_reversal import (Ensemble, FilterLaw, ReversedModel, build_reversed_model,
                            filter_mean_law, sample_gaussian_starts, simulate_backfill)

__all__ = [
    "BenchmarkSeries", "CensoredSeries", "CensorSpec", "apply_censoring", "sample_poisson_times",
    "AnchorSet", "BridgeSpec", "ConditionedEnsemble", "bridge_drift", "conditioned_start_law",
    "girsanov_kl", "interpolation_relaxation", "relax_paths", "simulate_conditioned_backfill",
    "BackfillError", "ConfigError", "DecompositionError", "DegenerateRegressionError",
    "FilterDivergenceError", "InvalidInputError", "ReversalUndefinedError",
    "RiccatiInstabilityError", "SingularCovarianceError", "StabilityBoundError", "StepSizeError",
    "UnreachableAnchorError", "FilterTrajectory", "GaussianState", "InnovationsPath",
    "OUCalibration", "OUTemplate", "calibrate_linear_model", "integrate_riccati",
    "run_kalman_bucy", "DensityGrid", "DensityTrajectory", "NonlinearModelSpec", "density_moments",
    "fokker_planck_step", "ks_update", "reversed_drift_from_density", "run_density_filter",
    "simulate_density_reversal", "stability_bound", "LinearModelSpec", "MatrixFunction",
    "PathSample", "TimeGrid", "gaussian_log_density", "gaussian_score", "make_uniform_grid",
    "simulate_linear_signal", "simulate_observation", "Ensemble", "FilterLaw", "ReversedModel",
    "build_reversed_model", "filter_mean_law", "sample_gaussian_starts", "simulate_backfill",
]

__version__ = "0.1.0"
