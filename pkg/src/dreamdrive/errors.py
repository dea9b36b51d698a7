"""Exception types shared across the package."""


class DreamDriveError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(DreamDriveError):
    """Tensor shapes are incompatible with the requested operation."""


class ConfigError(DreamDriveError):
    """A configuration value is outside its allowed range."""


class DeadStateError(DreamDriveError):
    """A simulator step was attempted on a crashed world."""


class DegenerateBatchError(DreamDriveError):
    """Batch statistics requested over fewer than two elements."""


class PoisonedGradientError(DreamDriveError):
    """A parameter gradient contains NaN; names the parameter."""


class TrainingDivergedError(DreamDriveError):
    """A training loss became NaN; carries the epoch and batch index."""

    def __init__(self, message: str, epoch: int, batch: int):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch


class FormatError(DreamDriveError):
    """A dataset file violates the on-disk format; carries the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class DataStarvationError(DreamDriveError):
    """A class has too few members for the requested split; names the class."""

    def __init__(self, message: str, action: int):
        super().__init__(message)
        self.action = action


class CheckpointError(DreamDriveError):
    """A checkpoint file is malformed or does not match the target network."""


class ModelUnavailableError(DreamDriveError):
    """A planner operation needs a model checkpoint that was not provided."""
