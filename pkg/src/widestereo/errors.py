"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError (and
subclasses) -> 3, GeometryDomainError -> 4.
"""


class WideStereoError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(WideStereoError):
    """Invalid configuration, flags, or projection/rig settings."""


class DataError(WideStereoError):
    """Missing, inconsistent, or unusable input data."""


class DataFormatError(DataError):
    """A file failed to parse. Carries the byte offset where parsing stopped."""

    def __init__(self, message: str, byte_offset: int | None = None):
        if byte_offset is not None:
            message = f"{message} (at byte offset {byte_offset})"
        super().__init__(message)
        self.byte_offset = byte_offset


class GeometryDomainError(WideStereoError):
    """Inputs violate the geometric domain of an operation (e.g. grid height
    does not match the stereo geometry it claims to describe)."""
