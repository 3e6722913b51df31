"""Exception hierarchy shared by the library and mapped to CLI exit codes."""


class DynTranSyncError(Exception):
    """Base class for all package errors."""


class DimensionError(DynTranSyncError, ValueError):
    """Array shapes or indices do not match the graph sequence."""


class PreconditionError(DynTranSyncError):
    """An estimator or builder precondition is violated (e.g. disconnected union graph)."""


class ConvergenceError(DynTranSyncError):
    """The iterative solver stopped before reaching the requested tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class UnsupportedSizeError(DynTranSyncError):
    """Dense diagnostics were requested on an instance above the size cap."""
