"""Exception types shared across the package."""


class GanensError(Exception):
    """Base class for all package errors."""


class ShapeError(GanensError):
    """Tensor or array shapes are incompatible with the requested operation."""


class NonFiniteError(GanensError):
    """A NaN or Inf appeared where only finite values are allowed."""


class GradientError(GanensError):
    """Gradients are missing or non-finite during an optimizer step."""


class VariantError(GanensError):
    """A model component was used with the wrong GAN variant."""


class DataError(GanensError):
    """Dataset files or arrays violate the expected format."""


class CheckpointError(GanensError):
    """A checkpoint file is missing, corrupted, or from an unknown version."""


class ConfigError(GanensError):
    """A run configuration is invalid or contains unknown keys."""


class OracleError(GanensError):
    """The constrained-optimization oracle failed to produce a solution."""
