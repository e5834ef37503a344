"""Exception types shared across the package."""


class SpinKineticsError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(SpinKineticsError, ValueError):
    """Operands live on different bases or have incompatible shapes."""


class ValidationError(SpinKineticsError, ValueError):
    """An input violates a documented invariant."""


class RegimeError(SpinKineticsError, ValueError):
    """Parameters fall outside the regime where a formula applies."""


class NumericalError(SpinKineticsError, RuntimeError):
    """A numerical routine failed to produce a trustworthy result."""


class NonDecayingGeneratorError(NumericalError):
    """The generator has non-decaying modes; infinite-time integrals diverge."""
