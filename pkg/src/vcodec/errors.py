"""Shared exception types for container parsing and coded streams."""


class FormatError(ValueError):
    """Malformed or unsupported on-disk container data."""


class BadMagicError(FormatError):
    """File does not start with the expected magic tag."""


class VersionError(FormatError):
    """Unsupported container version or nonzero reserved bytes."""


class PayloadMismatchError(FormatError):
    """Declared dims disagree with the stored payload length."""


class TruncatedStreamError(FormatError):
    """Coded byte stream ended before decoding finished."""


class CorruptSegmentError(FormatError):
    """Frame segment failed to parse into a valid frame."""


class InfeasibleError(ValueError):
    """Requested target (bits, MSE, or placement) cannot be met."""
