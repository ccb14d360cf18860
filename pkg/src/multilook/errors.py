"""Exception types shared across the package."""


class MultilookError(Exception):
    """Base class for errors raised by this package."""


class StructuralError(MultilookError):
    """Shapes or structural invariants of the inputs do not match."""


class ValidationError(MultilookError):
    """Input values are outside the documented domain."""


class NumericalError(MultilookError):
    """A numerical operation failed (singular matrix, non-convergence, ...)."""

    def __init__(self, message, rcond=None):
        super().__init__(message)
        self.rcond = rcond


class UsageError(MultilookError):
    """API called out of order (e.g. backward before forward)."""
