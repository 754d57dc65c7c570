"""
Exception hierarchy shared by the numerical modules and the CLI runner.
"""

from typing import List, Optional


class SkewDriftError(Exception):
    """Base class for all errors raised by skewdrift."""

    exit_code = 1


class ConfigError(SkewDriftError):
    """Invalid, unknown or missing configuration keys."""

    exit_code = 2

    def __init__(self, message: str, keys: Optional[List[str]] = None):
        """
        Initialize the error.

        Args:
            message: Human readable description
            keys: The offending configuration keys, if any
        """
        super().__init__(message)
        self.keys = list(keys or [])


class ValidationError(SkewDriftError):
    """A precondition of an operation is violated."""

    exit_code = 2


class MeshMismatchError(ValidationError):
    """Operands live on different meshes."""


class SolenoidalityError(ValidationError):
    """A drift fails the weak solenoidality gate."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class NormalTraceError(ValidationError):
    """A drift has a nonzero weak normal trace on the boundary."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class NumericalError(SkewDriftError):
    """A numerical procedure failed."""

    exit_code = 3


class SolverError(NumericalError):
    """The Krylov solver did not reach the requested tolerance."""

    def __init__(self, message: str, residuals: Optional[List[float]] = None):
        """
        Initialize the error.

        Args:
            message: Human readable description
            residuals: Relative residual history of the failed solve
        """
        super().__init__(message)
        self.residuals = list(residuals or [])


class QuadratureError(NumericalError):
    """A quadrature rule produced a degenerate value."""
