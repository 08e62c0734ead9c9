"""Exception classes shared across the package.

Each class carries the CLI exit code of its class so the front end can map
failures without inspecting messages.
"""


class SecrecyError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 4


class ValidationError(SecrecyError, ValueError):
    """A channel or chain failed validation; ``diagnostics`` lists why."""

    exit_code = 1

    def __init__(self, message, diagnostics=()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)


class InvalidDistribution(ValidationError):
    """Negative mass, a mass-sum violation, or a shape mismatch."""


class LabelError(SecrecyError, ValueError):
    """Unknown, repeated or overlapping variable labels."""

    exit_code = 1


class DocumentError(SecrecyError, ValueError):
    """A spec or experiment document could not be parsed."""

    exit_code = 2


class BudgetExceeded(SecrecyError):
    """A random-coding or enumeration workload exceeds the configured cap."""

    exit_code = 3


class InconsistencyError(SecrecyError, ArithmeticError):
    """An information quantity came out clearly negative."""

    exit_code = 4
