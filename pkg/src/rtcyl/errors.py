"""Exception types shared across the package."""


class RTCylError(Exception):
    """Base class for package errors."""


class DomainError(RTCylError, ValueError):
    """Argument outside the admitted domain of an operation."""


class ConvergenceError(RTCylError):
    """An iterative solver failed; ``state`` carries diagnostics."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state if state is not None else {}


class SolverError(RTCylError):
    """A direct solve or eigensolve failed."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics if diagnostics is not None else {}


class AdmissibilityError(DomainError):
    """Height field too large for the Hanzawa transform to be invertible."""
