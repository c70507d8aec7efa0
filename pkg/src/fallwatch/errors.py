"""Exception types shared across the package."""


class FallwatchError(Exception):
    """Base class for every error raised by this package."""


class InvalidSpecError(FallwatchError):
    """A configuration value is outside its legal range."""


class InvalidInputError(FallwatchError):
    """Runtime data violates a basic precondition (empty, mismatched, non-binary...)."""


class ShapeError(FallwatchError):
    """Tensor dimensions do not line up."""


class NumericError(FallwatchError):
    """Non-finite values where finite ones are required."""


class DataFormatError(FallwatchError):
    """A data file does not conform to the documented schema."""


class DataValidationError(FallwatchError):
    """A data file parses but its contents are inconsistent (e.g. timestamps)."""


class StratificationError(FallwatchError):
    """A class has too few recordings to be split."""


class DegenerateInputError(FallwatchError):
    """Metric is undefined for the given input (e.g. single-class ROC)."""


class ModelFileError(FallwatchError):
    """Base class for model-file load problems."""


class ModelVersionError(ModelFileError):
    """Unknown model file format version."""


class ModelDimensionError(ModelFileError):
    """Model file tensors contradict their own architecture metadata."""


class ModelCorruptError(ModelFileError):
    """Model file is unreadable or structurally broken."""
