"""Exception types shared across the package."""


class UnrankError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(UnrankError):
    """Invalid input data, configuration, or identifier."""


class NumericError(UnrankError):
    """A non-finite value appeared during scoring, gradients, or training."""
