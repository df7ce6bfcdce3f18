"""Exception types raised across the package."""


class AvgFieldError(Exception):
    """Base class for all package errors."""


class ConfigurationError(AvgFieldError, ValueError):
    """Invalid grid, settings or experiment configuration."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class ContractViolation(AvgFieldError, ValueError):
    """An operation was called outside its documented preconditions."""


class DegenerateStateError(AvgFieldError, ValueError):
    pass


class GeometryError(AvgFieldError, ValueError):
    pass


class ResolutionError(AvgFieldError, ValueError):
    pass


class SingularityError(AvgFieldError, ValueError):
    pass


class ModelError(AvgFieldError, RuntimeError):
    pass


class InsufficientDataError(AvgFieldError, ValueError):
    pass


class ResourceError(AvgFieldError, MemoryError):
    pass


class NumericalFailure(AvgFieldError, RuntimeError):
    """Non-finite values appeared during an iteration.

    The energy trace recorded up to the failure is kept on ``trace``.
    """

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)
