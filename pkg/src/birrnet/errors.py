"""Exception types shared across the package."""


class BirrnetError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(BirrnetError):
    """Tensor shapes do not satisfy an operation's contract."""


class ConfigError(BirrnetError):
    """A configuration value, mask, or flag combination is invalid."""


class StateError(BirrnetError):
    """Numeric state is corrupt (e.g. non-positive running variance)."""


class UsageError(BirrnetError):
    """An operation was called out of order (e.g. backward before forward)."""


class DecodeError(BirrnetError):
    """An image byte stream is malformed."""


class UnsupportedFormatError(DecodeError):
    """An image byte stream has an unknown or unsupported format."""


class DatasetError(BirrnetError):
    """A dataset cannot be scanned or split as requested."""


class ItemLoadError(DatasetError):
    """A dataset item failed to load; the message names the path."""


class WeightFileError(BirrnetError):
    """Base class for weight-file load failures."""


class WeightMagicError(WeightFileError):
    """Weight file does not start with the expected magic bytes."""


class WeightShapeError(WeightFileError):
    """Stored tensors do not match the model configuration."""


class WeightTruncationError(WeightFileError):
    """Weight file ends before the declared tensor data."""


class TrainingDivergedError(BirrnetError):
    """Training loss became non-finite; the message names epoch and batch."""
