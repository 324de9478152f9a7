"""Exception hierarchy shared by all dqe modules."""

from __future__ import annotations


class DqeError(Exception):
    """Base class for all errors raised by this package."""


class InvalidEntity(DqeError):
    """A structured-data field is empty or contains a reserved token."""


class InvalidInput(DqeError):
    """An argument violates a documented precondition."""


class ParseError(DqeError):
    """A file or payload could not be parsed.

    Carries the 1-based line number when the source is line-oriented.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvariantViolation(DqeError):
    """Data violates a documented invariant (e.g. answer not in description)."""


class EmptyDataset(DqeError):
    """An operation that requires at least one example received none."""


class MissingReference(DqeError):
    """Text-mode scoring was requested without a reference."""


class BackendUnavailable(DqeError):
    """A backend could not serve a request, including after retries."""


class InvalidContext(DqeError):
    """A data-modality context is not a well-formed linearization."""


class NotSupported(DqeError):
    """The backend does not implement the requested capability."""


class ProtocolError(DqeError):
    """A remote peer sent or received a malformed protocol body."""


class DimensionMismatch(DqeError):
    """Paired vectors have different lengths."""


class DegenerateVariance(DqeError):
    """A correlation input vector is constant."""


class InsufficientSamples(DqeError):
    """Too few samples for the requested statistic."""


class JoinError(DqeError):
    """Metric scores and ratings could not be joined; lists missing keys."""

    def __init__(self, message: str, missing: list[tuple[str, str]] | None = None):
        self.missing = missing or []
        super().__init__(message)


class ConsistencyError(DqeError):
    """A cache key was re-written with a different value."""


class StoreCorrupt(DqeError):
    """A cache entry disagrees with the store manifest."""


class ConfigError(DqeError):
    """A run configuration file or flag set is invalid."""
