"""Exception types shared across the toolkit."""


class DimensionError(ValueError):
    """Array shapes are incompatible with the requested operation."""


class PlacementError(RuntimeError):
    """Random spot placement exhausted its retry budget."""


class SingularRateError(ValueError):
    """A Poisson rate is zero where the likelihood requires it positive."""

    def __init__(self, pixel: int, message: str | None = None):
        self.pixel = pixel
        super().__init__(message or f"zero Poisson rate at measurement pixel {pixel}")


class FactorizationError(RuntimeError):
    """Symmetric positive-definite factorization failed even after regularization."""

    def __init__(self, epsilon: float, message: str | None = None):
        self.epsilon = epsilon
        super().__init__(message or f"SPD factorization failed with epsilon={epsilon!r}")


class ConfigError(ValueError):
    """Invalid experiment configuration."""
