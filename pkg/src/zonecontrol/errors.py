"""Exception hierarchy shared by all modules.

Validation problems derive from ``ValueError``; numerical breakdowns derive
from ``ArithmeticError``. The CLI maps the two families to exit codes 2 and 3.
"""


class ZoneControlError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(ZoneControlError, ValueError):
    pass


class NumericalError(ZoneControlError, ArithmeticError):
    pass


class IntegrationError(NumericalError):
    """Adaptive step size underflowed while integrating through an overlay."""


class BracketError(NumericalError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class NotInGapError(ValidationError):
    pass


class DefectiveMatrixError(NotInGapError):
    """Monodromy has a single eigenvector (energy sits on a band edge)."""


class NotInBandError(ValidationError):
    pass


class DerivativeTooSmallError(NumericalError):
    pass


class SingularTransformError(NumericalError):
    """The Wronskian or the weight-factor denominator vanishes on the interval."""


class AsymmetricInputError(ValidationError):
    pass
