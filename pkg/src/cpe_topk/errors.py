"""Exception types raised across the package."""


class CPEError(Exception):
    """Base class for all package errors."""


class ParameterError(CPEError, ValueError):
    """A scalar parameter is outside its admissible range."""


class InvalidArmError(CPEError, ValueError):
    """A super arm is malformed or incompatible with the instance."""


class NumericInputError(CPEError, ValueError):
    """A reward or matrix entry is NaN or infinite."""


class AmbiguousInstanceError(CPEError, ValueError):
    """The instance has more than one best super arm."""


class RankDeficientError(CPEError, ArithmeticError):
    """A design matrix is singular.

    Attributes:
        null_direction: unit vector spanning (approximately) the null space,
            or None when not computed.
    """

    def __init__(self, message: str, null_direction=None):
        super().__init__(message)
        self.null_direction = null_direction


class SizeGuardError(CPEError, ValueError):
    """An exhaustive computation was requested on an instance that is too large."""


class SymmetryError(CPEError, ValueError):
    """A matrix expected to be symmetric is not."""
