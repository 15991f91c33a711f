"""Exception types shared across the package."""


class LogigraphError(Exception):
    """Base class for all package errors."""


class LibraryError(LogigraphError):
    """Raised when a delimiter or stopword override file cannot be parsed."""


class DataError(LogigraphError):
    """Raised on malformed samples or dataset files."""


class GraphBuildError(LogigraphError):
    """Raised when a logic graph cannot be constructed for a sample."""


class ConfigError(LogigraphError):
    """Raised on invalid configuration values."""


class MissingEmbeddingError(LogigraphError):
    """Raised when an external embedding store has no record for a key."""


class ShapeMismatchError(LogigraphError):
    """Raised when a stored embedding matrix does not match the token count."""


class CheckpointError(LogigraphError):
    """Raised when a checkpoint file is malformed or incompatible."""


class NanGradientError(LogigraphError):
    """Raised when a gradient or loss turns non-finite during training."""
