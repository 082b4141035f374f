"""Exception types shared across the package."""


class EvogeneError(Exception):
    """Base class for all package errors."""


class DataError(EvogeneError):
    """Malformed, inconsistent, or non-finite input data."""


class DimensionError(EvogeneError):
    """Operand shapes do not conform."""


class NumericError(EvogeneError):
    """A non-finite value appeared where the numeric contracts forbid it."""
