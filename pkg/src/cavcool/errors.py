"""Exception types shared across the package."""


class CavcoolError(Exception):
    """Base class for all cavcool errors."""


class DomainError(CavcoolError, ValueError):
    """An argument is outside the operation's domain (bad index, rate, shape)."""


class DegenerateModelError(CavcoolError):
    """The requested quantity is not uniquely defined for these parameters."""


class StepSizeError(CavcoolError, RuntimeError):
    """Fixed-step integration failed its conservation or stability checks."""


class ConfigError(CavcoolError, ValueError):
    """An experiment configuration could not be parsed or validated."""
