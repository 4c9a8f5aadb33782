"""Exception hierarchy shared by the models, fitters and CLI."""


class SpinresError(Exception):
    """Base class for all errors raised by spinres."""


class DomainError(SpinresError, ValueError):
    """An argument lies outside the domain of an operation."""


class NotFoundError(SpinresError):
    """A requested feature (dip, root, crossing) is absent from the input."""


class NumericError(SpinresError, ArithmeticError):
    """A numerical procedure failed to converge or would underflow."""


class FitError(SpinresError):
    """A least-squares problem could not be solved."""


class InsufficientDataError(FitError):
    """Too little usable data to constrain the requested fit."""


class ParseError(SpinresError, ValueError):
    """An input file violates its declared format."""
