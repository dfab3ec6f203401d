"""Exception types shared across the package."""


class WordbrushError(Exception):
    """Base class for all package errors."""


class InvalidDescription(WordbrushError):
    """A description is empty, untokenizable, or violates a length contract."""


class ShapeError(WordbrushError):
    """Tensor dimensions do not satisfy an operation's contract."""


class NumericalFailure(WordbrushError):
    """A computation produced NaN/Inf or a score escaped its valid range."""


class DataError(WordbrushError):
    """A dataset, split, or table is missing, malformed, or inconsistent."""


class InsufficientData(WordbrushError):
    """An operation needs more items than the dataset provides."""
