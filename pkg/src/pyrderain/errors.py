"""Exception types shared across the package."""


class ShapeError(ValueError):
    """An array's dimensions violate an operation's contract."""


class ConfigError(ValueError):
    """A configuration file or flag set is invalid."""


class DataError(RuntimeError):
    """Image, corpus, or checkpoint data is missing or malformed."""


class CheckpointError(DataError):
    """A checkpoint file failed validation (magic, version, or truncation)."""


class NumericError(RuntimeError):
    """A numeric invariant failed, e.g. the training loss became non-finite."""
