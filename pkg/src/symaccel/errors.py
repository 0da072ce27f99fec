"""Exception types shared across the package."""


class SymAccelError(Exception):
    """Base class for all package errors."""


class DomainError(SymAccelError, ValueError):
    """An argument lies outside the domain of a formula (e.g. t <= 0)."""


class RangeError(SymAccelError, OverflowError):
    """A result cannot be represented as a finite float, or a composed step
    would visit a non-positive time."""


class ConfigError(SymAccelError, ValueError):
    """Invalid configuration or option combination."""


class StepFailure(SymAccelError, RuntimeError):
    """Step-size search exhausted its shrink budget."""


class DataFormatError(SymAccelError, ValueError):
    """Malformed dataset file. ``location`` names the offending row/column
    or byte offset when known."""

    def __init__(self, message, location=None):
        super().__init__(message if location is None else f"{message} (at {location})")
        self.location = location


class DivergenceError(SymAccelError, ArithmeticError):
    """A run produced a non-finite objective value.

    The partial trace up to (and including) the failing step is attached.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
