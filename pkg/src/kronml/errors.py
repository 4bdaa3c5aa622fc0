"""
Exception hierarchy shared by every kronml module.
"""


class KronmlError(Exception):
    """Base class for all errors raised by kronml."""


class PartitionError(KronmlError, ValueError):
    """Invalid partition, mismatched degree or degree out of range."""


class CharacterTableError(KronmlError):
    """A character table is malformed, mismatched or fails orthogonality."""


class KroneckerCorruptionError(KronmlError):
    """A character sum is negative or not divisible by n!."""


class DatasetError(KronmlError, ValueError):
    """Encoding, shape or class-balance problem in a labeled dataset."""


class ModelError(KronmlError, ValueError):
    """Bad hyperparameters, input shape, encoding or a diverging fit."""


class ReportError(KronmlError, OSError):
    """A report could not be rendered or written."""


class VerificationError(KronmlError):
    """A property check of the verification suite failed."""
