"""Exception types shared across the pipeline."""


class CallsiftError(Exception):
    """Base class for all pipeline errors."""


class DecodeError(CallsiftError):
    """Malformed audio container or header."""


class UnsupportedFormatError(CallsiftError):
    """Audio codec/sample format outside PCM16 / IEEE float mono-stereo."""


class FormatError(CallsiftError):
    """Corrupt or truncated binary artifact (embedding matrix, checkpoint)."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ConfigurationError(CallsiftError):
    """Inconsistent configuration (mismatched dims, impossible filterbank, ...)."""


class DependencyError(CallsiftError):
    """A pipeline stage was read before its inputs were produced."""


class NotFoundError(CallsiftError):
    """Unknown cluster id, window id, or missing resource."""
