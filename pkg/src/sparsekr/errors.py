"""Exception hierarchy shared across the toolkit.

Every error raised by library code is a SparsekrError subclass so callers
(and the CLI exit-code mapping) can catch one family.
"""


class SparsekrError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgumentError(SparsekrError, ValueError):
    """Caller passed inconsistent shapes, lengths, or parameter values."""


class InsufficientDataError(SparsekrError, ValueError):
    """Not enough examples to perform the requested operation."""


class DegenerateDataError(SparsekrError, ValueError):
    """Data carries no usable information (zero variance, all points excluded)."""


class DataFormatError(SparsekrError, ValueError):
    """A file could not be parsed or failed its schema checks."""


class NumericError(SparsekrError, ArithmeticError):
    """A numerical routine produced or encountered non-finite values."""
