"""Exception hierarchy shared by every hurricast module."""

from __future__ import annotations


class HurricastError(Exception):
    """Base class for all library errors."""


class ParseError(HurricastError, ValueError):
    """Malformed input text. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DomainError(HurricastError, ValueError):
    pass


class ContiguityError(HurricastError, ValueError):
    pass


class AggregationError(HurricastError, ValueError):
    def __init__(self, message: str, year: int | None = None):
        self.year = year
        super().__init__(message)


class DegenerateSeriesError(HurricastError, ValueError):
    pass


class AlignmentError(HurricastError, ValueError):
    pass


class InsufficientHistoryError(HurricastError, ValueError):
    pass


class SingularDesignError(HurricastError, ValueError):
    pass


class ConfigurationError(HurricastError, ValueError):
    pass


class PreconditionError(HurricastError, ValueError):
    pass


class SchemaError(HurricastError, ValueError):
    pass


class OptimizationError(HurricastError, RuntimeError):
    pass


class EstimationError(HurricastError, RuntimeError):
    """Model estimation failed; ``diagnostics`` holds the best point reached."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class BacktestError(HurricastError, RuntimeError):
    pass
