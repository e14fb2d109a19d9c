"""Exception hierarchy shared by every sqav module."""


class SqavError(Exception):
    """Base class for all errors raised by sqav."""


class InvalidDimensionError(SqavError, ValueError):
    """Particle count, level count or matrix shape is not acceptable."""


class InvalidPermutationError(SqavError, ValueError):
    """A sequence expected to hold distinct entries has a repeat."""


class NormalizationError(SqavError, ValueError):
    """A state or matrix violates its normalization/unitarity invariant."""


class ResourceBudgetError(SqavError, MemoryError):
    """A requested state would exceed the configured term budget."""


class ConfigurationError(SqavError, ValueError):
    """A protocol or scenario configuration is invalid."""


class SequencingError(SqavError, RuntimeError):
    """A protocol step was invoked out of order."""


class BroadcastTimeout(SqavError, RuntimeError):
    """The simultaneous broadcast did not receive every column."""
