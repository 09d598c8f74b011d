"""Exception hierarchy shared by all modules.

Every error carries an ``exit_code`` so the command-line front end can map
failures onto its exit-code contract without inspecting messages.
"""


class GbmError(Exception):
    exit_code = 1


class ConfigurationError(GbmError, ValueError):
    """Bad parameters, unknown preset names, malformed JSON descriptions."""

    exit_code = 2


class DomainError(GbmError, ValueError):
    exit_code = 2


class UnsupportedOrderError(GbmError, ValueError):
    exit_code = 2


class UnsupportedStateError(GbmError, ValueError):
    exit_code = 2


class ParseError(GbmError, ValueError):
    exit_code = 3

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InsufficientDataError(GbmError):
    exit_code = 4


class DataQualityError(GbmError):
    exit_code = 4


class NumericalInconsistencyError(GbmError, ArithmeticError):
    exit_code = 5


class PoleError(NumericalInconsistencyError, ZeroDivisionError):
    """Pattern function evaluated where gamma + conj(gamma) vanishes."""


class RangeError(NumericalInconsistencyError, OverflowError):
    """Result magnitude not representable; ``log_magnitude`` holds ln|value|."""

    def __init__(self, message, log_magnitude=None):
        super().__init__(message)
        self.log_magnitude = log_magnitude
