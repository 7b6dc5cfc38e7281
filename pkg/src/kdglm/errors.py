"""Exception hierarchy shared by the library and the CLI."""


class KDGLMError(Exception):
    """Base class for all package errors."""


class ConfigurationError(KDGLMError):
    """Inconsistent model structure or run configuration."""


class DataError(KDGLMError):
    """Malformed or invalid observations."""


class DomainError(KDGLMError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class NumericalError(KDGLMError):
    """A numerical procedure failed (singular matrix, non-finite value, ...)."""


class SolverError(NumericalError):
    """Iterative solver did not converge.

    ``residual`` holds the residual norm at the last iterate.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class FilterError(NumericalError):
    """Failure inside the filtering recursion.

    Carries the failing time index and the trajectory computed up to it.
    """

    def __init__(self, t, cause, partial=None):
        super().__init__(f"filtering failed at t={t}: {cause}")
        self.t = t
        self.cause = cause
        self.partial = partial


class ForecastError(NumericalError):
    def __init__(self, j, cause):
        super().__init__(f"forecast failed at horizon j={j}: {cause}")
        self.j = j
        self.cause = cause
