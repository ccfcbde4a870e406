"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError and its
subclasses -> 3, NumericalError -> 4.
"""


class QslaError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(QslaError):
    """Invalid configuration value, unknown key, or inconsistent settings."""


class ShapeError(QslaError):
    """Tensor shape/dimension mismatch in a graph operation."""


class DataError(QslaError):
    """Problem with an on-disk dataset or manifest."""


class BadMagicError(DataError):
    """File does not start with the expected magic bytes."""


class VersionError(DataError):
    """File format version is not supported."""


class TruncatedFileError(DataError):
    """File ended before the declared payload was complete."""


class ChecksumError(DataError):
    """Payload checksum does not match the stored CRC."""


class FingerprintError(DataError):
    """Weight manifest does not match the model configuration."""


class NumericalError(QslaError):
    """NaN/Inf encountered, divergence, or a failed numerical check."""
