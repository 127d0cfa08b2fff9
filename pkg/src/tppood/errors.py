"""Exception hierarchy shared across the package."""


class TppError(Exception):
    """Base class for all package errors."""


class ValidationError(TppError, ValueError):
    """An event sequence violates one of its invariants."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NonMonotoneTimes(ValidationError):
    pass


class TimeOutOfRange(ValidationError):
    pass


class MarkOutOfRange(ValidationError):
    pass


class MarkLengthMismatch(ValidationError):
    pass


class ParseError(TppError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyDataset(TppError, ValueError):
    pass


class InvalidDelta(TppError, ValueError):
    pass


class ParameterDomainError(TppError, ValueError):
    pass


class NonStationaryParameters(ParameterDomainError):
    pass


class UnknownModelKind(TppError, ValueError):
    pass


class MarkCountMismatch(TppError, ValueError):
    pass


class DegenerateCompensator(TppError, ValueError):
    pass


class NonFiniteObjective(TppError, ArithmeticError):
    pass


class EmptyInput(TppError, ValueError):
    pass
