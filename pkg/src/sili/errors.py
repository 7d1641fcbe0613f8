"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """Raised when an argument violates a documented precondition."""


class EmptyBufferError(RuntimeError):
    """Raised when a sampling operation needs more stored interactions than exist."""


class ProtocolError(RuntimeError):
    """Raised when an environment is driven outside its step protocol."""


class PoisonedUpdateError(RuntimeError):
    """Raised when a gradient or parameter becomes NaN/Inf during an update."""


class ConfigError(ValueError):
    """Raised when an experiment config file is malformed or has unknown keys."""
