"""Exception types raised by the package."""


class QsuffError(Exception):
    """Base class for all errors raised here."""


class InputError(QsuffError, ValueError):
    """Malformed or inconsistent input (shape, dimension, non-finite entries)."""


class NotHermitianError(InputError):
    pass


class NotPSDError(InputError):
    pass


class NotAbsolutelyContinuousError(QsuffError):
    """No PSD R with R rho R = X exists within tolerance."""


class NotInRangeError(QsuffError):
    """X is not in the range of the Jordan multiplication by rho."""


class NotModularInvariantError(QsuffError):
    """The algebra is not closed under B -> rho B rho^-1."""

    def __init__(self, message, element=None, residual=None):
        super().__init__(message)
        self.element = element
        self.residual = residual


class NotSufficientError(QsuffError):
    pass


class StructureError(QsuffError):
    """Block-structure identification did not reach tolerance."""


class ConsistencyError(QsuffError):
    """An internal post-condition failed numerically."""
