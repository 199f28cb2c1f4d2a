"""Exception types shared across the package."""


class StructuralError(ValueError):
    """Array shape or geometry does not match what an operation expects."""


class PreconditionError(ValueError):
    """Inputs violate a documented precondition."""


class BandLimitError(PreconditionError):
    """A field's frequency content is not resolved by its geometry.

    ``axis`` holds the offending direction (0-based, real directions first).
    """

    def __init__(self, message, axis=None):
        super().__init__(message)
        self.axis = axis


class WraparoundError(PreconditionError):
    """A wave packet would wrap around a truncated real direction."""


class UnsupportedRegimeError(ValueError):
    """The requested (m, n) pair has no stated constant."""


class NumericalAbort(RuntimeError):
    """Raised when an evolution blows up or produces non-finite values."""
