"""Exception hierarchy."""


class BackfillError(Exception):
    """Base class for all errors raised by the package."""


class InvalidInputError(BackfillError, ValueError):
    """An argument violates a documented precondition."""


class DecompositionError(BackfillError, ValueError):
    """A covariance matrix could not be factorized (not SPD)."""


class RiccatiInstabilityError(BackfillError):
    """The Riccati solution lost positive semi-definiteness."""

    def __init__(self, time: float, min_eig: float):
        super().__init__(f"Riccati solution not PSD at t={time:.6g} (min eigenvalue {min_eig:.3e})")
        self.time = time
        self.min_eig = min_eig


class DegenerateRegressionError(BackfillError, ValueError):
    """Calibration regression has no variation to work with."""


class StabilityBoundError(BackfillError, ValueError):
    """Explicit finite-difference step exceeds its stability bound."""

    def __init__(self, dt: float, dt_max: float):
        super().__init__(f"dt={dt:.3e} exceeds stability bound; use dt <= {dt_max:.3e}")
        self.dt = dt
        self.suggested_dt = dt_max


class FilterDivergenceError(BackfillError):
    """The density filter lost all of its mass."""


class ReversalUndefinedError(BackfillError):
    """Density too small to evaluate the reversed drift."""


class SingularCovarianceError(BackfillError):
    """Law covariance singular at a time where the score is needed."""

    def __init__(self, time: float):
        super().__init__(f"singular covariance at t={time:.6g}")
        self.time = time


class UnreachableAnchorError(BackfillError):
    """The transition Gramian to an anchor is singular."""

    def __init__(self, anchor_time: float, index: int):
        super().__init__(f"anchor #{index} at t={anchor_time:.6g} unreachable: degenerate diffusion")
        self.anchor_time = anchor_time
        self.index = index


class StepSizeError(BackfillError):
    """Grid too coarse to resolve the anchors."""

    def __init__(self, message: str, required_dt: float):
        super().__init__(f"{message}; required dt <= {required_dt:.3e}")
        self.required_dt = required_dt


class ConfigError(BackfillError, ValueError):
    """Bad configuration file or option."""
