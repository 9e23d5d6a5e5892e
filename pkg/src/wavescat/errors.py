"""Exception types shared across the package."""


class WavescatError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(WavescatError):
    """A construction parameter or scenario option is invalid."""


class ShapeError(WavescatError):
    """Fields, media or operators live on incompatible grids or fibers."""


class PositivityError(WavescatError):
    """A medium fails the positive-definiteness requirement."""


class SymbolEvalError(WavescatError):
    """A symbol produced non-finite or malformed values."""


class SolverError(WavescatError):
    """An iterative solve did not reach the requested tolerance.

    Carries the best residual reached so callers can decide whether to
    retry with a dense factorization.
    """

    def __init__(self, message, achieved_residual=None, iterations=None):
        super().__init__(message)
        self.achieved_residual = achieved_residual
        self.iterations = iterations


class DenseCapError(WavescatError):
    """A dense-only diagnostic was requested above the materialization cap."""


class InsufficientDataError(WavescatError):
    """Too few lattice points or singular values for a requested fit."""


class DegenerateFitError(WavescatError):
    """A log-log fit hit zero values inside the fitting window."""
