"""Exception hierarchy shared by every module."""


class DoolError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(DoolError, ValueError):
    """Inconsistent shapes, unknown names, invalid settings."""


class NumericalFailure(DoolError, ArithmeticError):
    """Non-finite values appeared during training or stepping."""


class UnsupportedGraphError(DoolError, TypeError):
    """A loss graph used a construct the reverse-mode engine cannot differentiate."""


class InvalidCoefficientsError(DoolError, ValueError):
    pass


class SamplingInfeasibleError(DoolError, RuntimeError):
    pass


class PositivityError(DoolError, ValueError):
    """A field entering a denominator dropped below the positivity floor."""


class DomainError(DoolError, ValueError):
    pass


class BlowUpError(NumericalFailure):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ReferenceFailure(NumericalFailure):
    """The reference solver diverged; usually a sign of bad parameters."""
