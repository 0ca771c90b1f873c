"""Exception types shared across the package."""

from __future__ import annotations


class InvalidParameterError(ValueError):
    """A constructor or function argument is outside its valid domain."""


class NoConfigurationError(ValueError):
    """No (k, l) combination satisfies the requested constraints."""


class ResourceLimitError(ValueError):
    """The requested computation exceeds a hard size limit."""


class SnapshotError(ValueError):
    """Base class for snapshot parse failures."""


class BadMagicError(SnapshotError):
    pass


class UnsupportedVersionError(SnapshotError):
    pass


class TruncatedSnapshotError(SnapshotError):
    pass


class CorruptSnapshotError(SnapshotError):
    """Header parses but the state violates a filter invariant."""
