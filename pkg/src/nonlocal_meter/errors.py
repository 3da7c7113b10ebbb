"""Exception types shared across the package."""


class NonlocalMeterError(Exception):
    """Base class for errors raised by this package."""


class InvariantViolation(NonlocalMeterError, ValueError):
    """A numerical invariant (norm, hermiticity, unitarity, ...) was broken."""


class ImpossibleOutcome(NonlocalMeterError, ValueError):
    """A post-selection asked for an outcome whose probability is zero."""


class ConfigError(NonlocalMeterError, ValueError):
    """Malformed run configuration."""
