"""Exception hierarchy shared by all nver modules."""


class NverError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(NverError):
    """Tensor shapes do not conform for the requested operation."""


class ConfigError(NverError):
    """Invalid hyperparameter, model spec, or call configuration."""


class LabelError(NverError):
    """A class label lies outside the valid range."""


class DataError(NverError):
    """Malformed embedding file, manifest, or non-finite data."""


class StratificationError(NverError):
    """A class has too few samples for the requested fold count."""


class NumericError(NverError):
    """Non-finite gradients, diverged training, or a failed numeric check."""
