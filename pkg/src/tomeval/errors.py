"""Exception hierarchy.

Everything the toolkit raises on bad input derives from :class:`TomevalError`.
The CLI maps :class:`DataIOError` (and plain ``OSError``) to exit status 2 and
every other :class:`TomevalError` to exit status 1.
"""


class TomevalError(Exception):
    """Base class for all toolkit errors."""


class ParseError(TomevalError):
    """Input text could not be tokenised or decoded."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(TomevalError):
    """Well-formed input missing a required element."""


class GeometryError(TomevalError):
    """A box or window violates its geometric invariants."""


class RangeError(TomevalError):
    """A numeric field is outside its allowed range."""


class ConsistencyError(TomevalError):
    """Two sources of truth disagree (e.g. manifest counts vs. XML files)."""


class UsageError(TomevalError, ValueError):
    """An operation was called with arguments outside its contract."""


class DataIOError(TomevalError, OSError):
    """A file the pipeline depends on is missing or unreadable."""
