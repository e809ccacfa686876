"""Exception types shared across the package."""


class CapacityError(RuntimeError):
    """A dense materialization would exceed the configured cell cap."""


class DegenerateColumnError(ValueError):
    """A data column has too few distinct values to build a grid or marginal."""


class InsufficientDataError(ValueError):
    """No complete rows are available for empirical estimation."""


class DivergenceError(RuntimeError):
    """An optimizer produced a non-finite objective or parameters."""


class ZeroLikelihoodError(RuntimeError):
    """Conditioning evidence has zero likelihood under every mixture component."""


class ConfigError(ValueError):
    """An invalid fitting or CLI configuration."""
