"""Shared exception types."""


class EdfsimError(Exception):
    """Base class for errors raised by this package."""


class ParameterError(EdfsimError, ValueError):
    """A parameter is outside its documented domain."""


class TruncationError(EdfsimError, RuntimeError):
    """A series could not reach its tolerance within the configured term cap."""


class NotPositiveSemidefiniteError(EdfsimError, ValueError):
    """A matrix that must be positive semidefinite is not."""

    def __init__(self, min_eigenvalue: float, message: str | None = None):
        self.min_eigenvalue = float(min_eigenvalue)
        if message is None:
            message = (
                "matrix is not positive semidefinite "
                f"(smallest eigenvalue {self.min_eigenvalue:.6e})"
            )
        super().__init__(message)


class DenseCapError(EdfsimError, ValueError):
    """Materializing a dense matrix would exceed the configured size cap."""


class DegenerateSampleError(EdfsimError, RuntimeError):
    """A random draw produced a degenerate object and should be regenerated."""


class ApproximationError(EdfsimError, ValueError):
    """A closed-form approximation is undefined or invalid for the given inputs."""


class ConfigError(EdfsimError, ValueError):
    """A run configuration (JSON or dataclass) is malformed."""
