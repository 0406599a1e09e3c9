"""Exception types raised by bsplan."""


class BsplanError(Exception):
    """Base class for all package errors."""


class InputError(BsplanError, ValueError):
    """Invalid model, plan, prior, cost or data input."""


class EnumerationCapExceeded(BsplanError):
    """The outcome space is larger than the configured enumeration cap.

    Callers should switch to a Monte Carlo path.
    """

    def __init__(self, size, cap):
        self.size = size
        self.cap = cap
        super().__init__(f"outcome space has {size} elements, cap is {cap}")


class NumericalInstabilityError(BsplanError, ArithmeticError):
    """An alternating-sum closed form would lose too much precision."""


class SingularInformationError(BsplanError, ArithmeticError):
    """The Fisher information matrix is singular or numerically so."""


class WeightUnderflowError(BsplanError, ArithmeticError):
    """All importance weights underflowed to zero."""
