"""Exception hierarchy shared by all modules."""


class SwmixError(Exception):
    """Base class for toolkit errors."""


class StructuralError(SwmixError, ValueError):
    """Shapes or block structures do not match."""


class DomainError(SwmixError, ValueError):
    """Input lies outside the mathematical domain of an operation."""


class NumericalError(SwmixError, ArithmeticError):
    """A numerical routine failed to reach its accuracy target."""


class ValidationError(SwmixError):
    """An operator failed the Markov (unital CP) checks."""


class PreconditionError(SwmixError):
    """A documented precondition does not hold; the check was skipped."""


class CapacityError(SwmixError):
    """Request exceeds what an operation is designed to handle."""


class ShapeError(SwmixError, ValueError):
    """An element does not have the shape a bound is asserted for."""


class DiagnosticError(SwmixError):
    """Two independent routes to the same answer disagree."""
