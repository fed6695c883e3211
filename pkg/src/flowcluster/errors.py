"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A scenario/sweep configuration is invalid; message names the field."""


class InvalidMatchError(ValueError):
    """Match fields violate their contract (e.g. empty context label)."""


class InvalidRequestError(ValueError):
    """A sink was asked something malformed (empty key, unknown context id)."""


class RingError(RuntimeError):
    """CHORD ring is unusable: empty, or ring-position collision between sinks."""


class ResolutionError(RuntimeError):
    """Flow resolution could not complete; safe to retry."""


class IdCollisionError(RuntimeError):
    """Two distinct values hashed to one 64-bit identifier; fatal, never merged."""


class ContractError(RuntimeError):
    """An operation was called outside its stated precondition."""


class MetricsError(RuntimeError):
    """A metric is undefined (no transmissions) or internally inconsistent."""
