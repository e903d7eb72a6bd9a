"""Exception hierarchy shared by all estimators and the CLI."""

from __future__ import annotations


class SpectroKalmanError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(SpectroKalmanError, ValueError):
    """Invalid model parameters or dimension mismatches."""


class PreconditionError(SpectroKalmanError, ValueError):
    """An operation was called with inputs outside its domain."""


class NumericalFailure(SpectroKalmanError, ArithmeticError):
    """A recursion produced a non-finite or non-positive quantity.

    ``step`` is the zero-based observation index where it happened, or
    ``None`` when the failure is not tied to a step.
    """

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class DareConvergenceError(NumericalFailure):
    """Riccati solver gave up before reaching its tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message}: residual {residual:.3e} after {iterations} iterations")
        self.residual = residual
        self.iterations = iterations


class TooFewPeaksError(SpectroKalmanError, ValueError):
    """Fewer R peaks than needed to build any centred segment."""

    def __init__(self, found: int, needed: int = 3):
        super().__init__(f"found {found} usable R peaks, need at least {needed}")
        self.found = found
        self.needed = needed
