"""Exception hierarchy shared by every analysis module."""


class CubulationError(Exception):
    """Base class for all toolkit errors."""


class InputError(CubulationError, ValueError):
    """Malformed or inconsistent input data."""

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class LimitError(CubulationError):
    """A size cap guarding an exponential search was exceeded."""


class PreconditionError(CubulationError, ValueError):
    """An operation was called on data violating its stated premises."""
