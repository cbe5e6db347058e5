"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """An argument, compressor spec, method spec, or config file is invalid."""


class InvariantViolation(RuntimeError):
    """A runtime correctness check failed during a simulation."""
