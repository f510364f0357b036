"""Exception types raised across the package."""


class StarkProbeError(Exception):
    """Base class for all package errors."""


class InvalidArgumentsError(StarkProbeError, ValueError):
    pass


class NotInSectorError(StarkProbeError, ValueError):
    pass


class DimensionMismatchError(StarkProbeError, ValueError):
    pass


class TooLargeError(StarkProbeError, ValueError):
    pass


class ConvergenceError(StarkProbeError, RuntimeError):
    """Eigensolver did not reach the requested residual."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DegenerateGroundStateError(StarkProbeError, RuntimeError):
    pass


class StepUnderflowError(StarkProbeError, RuntimeError):
    pass


class PeakAtBoundaryError(StarkProbeError, RuntimeError):
    def __init__(self, message, h=None, qfi=None):
        super().__init__(message)
        self.h = h
        self.qfi = qfi


class InsufficientDataError(StarkProbeError, ValueError):
    """Too few sizes or points for a fit, or a failed window screen."""


class DegenerateCollapseError(StarkProbeError, RuntimeError):
    pass


class ConfigError(StarkProbeError, ValueError):
    pass
