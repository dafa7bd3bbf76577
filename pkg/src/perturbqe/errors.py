"""Exception hierarchy shared across the pipeline.

The CLI maps these onto process exit codes: config problems exit 2,
backend/provider problems exit 3, data problems exit 4.
"""

from __future__ import annotations


class PerturbQEError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(PerturbQEError, ValueError):
    """A library operation was called with arguments violating its contract."""


class ConfigError(PerturbQEError):
    """The run configuration is missing, malformed, or self-contradictory."""


class DataError(PerturbQEError):
    """A dataset or artifact file is malformed or misaligned."""


class BackendError(PerturbQEError):
    """The translation backend failed permanently or violated its contract."""


class TransientBackendError(BackendError):
    """A transport-level backend failure that is worth retrying."""


class ProtocolError(BackendError):
    """The backend answered, but the response does not match the wire format."""


class ProviderError(PerturbQEError):
    """The replacement provider failed or returned malformed candidates."""

    def __init__(self, message: str, *, retryable: bool = False) -> None:
        super().__init__(message)
        self.retryable = retryable


class InternalInvariantError(PerturbQEError, RuntimeError):
    """An internal consistency check failed; indicates a bug, not bad input."""
