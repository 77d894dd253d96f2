"""Exception hierarchy shared by all modules."""


class FracornError(Exception):
    """Base class for library errors."""


class InvalidInputError(FracornError, ValueError):
    pass


class ParameterError(FracornError, ValueError):
    pass


class DomainError(FracornError, ValueError):
    """A point lies outside the region where an object is defined."""


class InvalidPolygonError(InvalidInputError):
    pass


class CoverError(FracornError):
    pass


class ResolutionError(FracornError, ValueError):
    pass


class QuadratureError(FracornError, ArithmeticError):
    """Non-finite kernel or integrand value; ``pair`` holds the offending points."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class BasisError(FracornError):
    """Basis rejected (conditioning) or empty after deflation."""


class ConstraintViolationError(FracornError):
    pass
