"""Exception hierarchy and CLI exit codes."""


class FinmixError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 1


class ConfigError(FinmixError, ValueError):
    """Invalid configuration, model specification or law parameters."""

    exit_code = 2


class NumericalError(FinmixError, ArithmeticError):
    """A numeric degeneracy that makes the requested quantity meaningless."""

    exit_code = 3


class DomainError(NumericalError):
    """Argument outside a declared MGF domain."""


class DegenerateDenominator(NumericalError):
    """Characteristic-function modulus below the division floor."""


class EmptyWindow(NumericalError):
    """Kernel window carries no effective mass at the target point."""


class OverflowBudget(NumericalError):
    """MGF argument times data range exceeds the exponent budget."""


class BranchAmbiguity(NumericalError):
    """Principal-log slope too close to the branch cut."""


class ParallelSlopes(NumericalError):
    """Regression increments too close to separate the components."""


class SeriesBudget(NumericalError):
    """Series arguments run too far beyond the observed data range."""


class SingularSystem(NumericalError):
    """Linear system with determinant below its floor."""

    def __init__(self, message, determinant=None):
        super().__init__(message)
        self.determinant = determinant


class IllConditioned(NumericalError):
    """Nested finite differences lost the signal to rounding or truncation."""


class DataIOError(FinmixError, OSError):
    """Unreadable or unwritable data file."""

    exit_code = 4


class NotIdentified(NumericalError):
    """No testable identification condition holds at the probed points."""
