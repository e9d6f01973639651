"""Exception types shared across the package."""

from __future__ import annotations


class FracError(Exception):
    """Base class for all errors raised by :mod:`fracpb`."""


class DomainError(FracError, ValueError):
    """An argument lies outside the domain where an operation is defined."""


class PoleError(DomainError):
    """Gamma function evaluated at a non-positive integer."""


class DimensionError(FracError, ValueError):
    """Operands have incompatible shapes or anchors."""


class NonConvergenceError(FracError, ArithmeticError):
    """A series did not meet its truncation criterion within the term cap.

    ``report`` carries whatever diagnostic object the raising routine had
    at hand (a convergence report for Peano-Baker series, ``None`` otherwise).
    """

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class ProblemFileError(FracError, ValueError):
    """Malformed problem file. ``lineno`` is 1-based, or ``None`` if unknown."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
