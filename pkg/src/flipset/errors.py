"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes (config 2, data 3, numerical 4); the
HTTP service maps them onto status codes.
"""


class FlipsetError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(FlipsetError):
    """Invalid run configuration (bad paths, unknown options, bad values)."""


class DataError(FlipsetError):
    """Malformed or inconsistent input data (files, labels, dimensions)."""


class InputError(FlipsetError, ValueError):
    """Precondition violation on an in-process API call."""


class DegenerateRemainderError(DataError):
    """Retraining remainder is unusable (empty, or only one class left)."""


class TrainingError(FlipsetError):
    """Newton training failed to converge within the iteration budget."""

    def __init__(self, message: str, last_grad_norm: float, iterations: int):
        super().__init__(message)
        self.last_grad_norm = last_grad_norm
        self.iterations = iterations


class NumericalError(FlipsetError):
    """A linear solve or factorization broke down."""
