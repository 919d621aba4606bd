"""Exception hierarchy shared by every module of the package."""


class LogEIBOError(Exception):
    """Base class for all errors raised by ``logei_bo``."""


class DomainError(LogEIBOError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ShapeError(LogEIBOError, ValueError):
    """Array dimensions do not agree."""


class NumericError(LogEIBOError, ArithmeticError):
    """A computation failed for numerical reasons (singular matrix, bad round-off)."""


class AcquisitionOverflowError(NumericError, OverflowError):
    """An exponent exceeded the largest representable double."""
