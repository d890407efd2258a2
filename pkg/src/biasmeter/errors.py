"""Shared exception types."""


class BiasmeterError(Exception):
    """Base class for all package errors."""


class ConfigurationError(BiasmeterError):
    """Bad lexicon, config file, or other static input."""


class InsufficientDataError(BiasmeterError):
    """A corpus or stream cannot satisfy a requested sample size."""


class ScoreError(BiasmeterError):
    """Base class for scorer failures."""


class UnknownTokenError(ScoreError):
    """A target token is outside the backend vocabulary."""


class UnansweredRequestError(ScoreError):
    """A dump backend has no response for a request id."""


class AttentionUnavailableError(ScoreError):
    """The backend cannot supply attention weights."""


class MalformedPairError(BiasmeterError):
    """An evaluation pair violates its structural invariants."""


class UndefinedCorrelationError(BiasmeterError):
    """Correlation requested on a zero-variance vector."""


class CheckpointError(BiasmeterError):
    """Corrupt, truncated, or incompatible checkpoint file."""


class StaleArtifactError(BiasmeterError):
    """A pipeline stage's recorded input hash no longer matches the file."""
