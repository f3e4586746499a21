"""Noise samplers and the probabilistic layer.

Two measurement models over the noiseless image b = H v:

* Gaussian: y = b + n with n ~ N(0, sigma2 * I) (read-noise-limited).
* Poisson:  y_l ~ Poisson(b_l + background) independently (shot-noise-limited).

The Poisson background floor keeps likelihood, score, and Fisher information
well defined where a sparse object's PSF copies never deposit photons;
background = 0 is allowed and raises explicit errors on zero rates.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DimensionError, SingularRateError
from .forward_model import SystemMatrix, VectorizedObject


@dataclass(frozen=True)
class GaussianNoise:
    sigma2: float  # per-pixel variance, photons^2

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")


@dataclass(frozen=True)
class PoissonNoise:
    background: float = 0.0  # photons, added to every rate

    def __post_init__(self):
        if self.background < 0:
            raise ValueError("background must be non-negative")


def _values(v):
    return v.values if isinstance(v, VectorizedObject) else np.asarray(v, dtype=float)


def _rates(model, H: SystemMatrix, v):
    b = H.matrix @ _values(v)
    if isinstance(model, PoissonNoise):
        b = b + model.background
    return b


def sample(model, b, seed) -> np.ndarray:
    """Draw one noisy measurement from the model around noiseless image b."""
    b = np.asarray(b, dtype=float)
    rng = np.random.default_rng(seed)
    if isinstance(model, GaussianNoise):
        if np.any(b < 0):
            raise ValueError("noiseless image must be non-negative")
        return b + rng.normal(0.0, np.sqrt(model.sigma2), size=b.shape)
    rate = b + model.background
    if np.any(rate < 0):
        raise ValueError("Poisson rate must be non-negative")
    return rng.poisson(rate).astype(float)


def log_likelihood(model, H: SystemMatrix, v, y) -> float:
    """ln p(y; v). Poisson returns -inf when a zero rate meets a nonzero count."""
    y = np.asarray(y, dtype=float)
    if y.shape[0] != H.k:
        raise DimensionError(f"measurement length {y.shape[0]} != H rows {H.k}")
    b = _rates(model, H, v)
    if isinstance(model, GaussianNoise):
        r = y - b
        k = y.size
        return float(-0.5 * (r @ r) / model.sigma2
                     - 0.5 * k * np.log(2.0 * np.pi * model.sigma2))
    if np.any((b == 0) & (y > 0)):
        return float("-inf")
    with np.errstate(divide="ignore", invalid="ignore"):
        ylogb = np.where(y > 0, y * np.log(b), 0.0)
    return float(np.sum(ylogb - b - gammaln(y + 1.0)))


def _poisson_ratio(b, y):
    """y / b with the 0/0 convention y=0 -> 0; raises on y>0 at zero rate."""
    zero = (b == 0) & (y > 0)
    if np.any(zero):
        raise SingularRateError(int(np.argmax(zero)))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(y > 0, y / b, 0.0)


def score(model, H: SystemMatrix, v, y) -> np.ndarray:
    """Gradient of the log-likelihood with respect to the object pixels."""
    y = np.asarray(y, dtype=float)
    b = _rates(model, H, v)
    if isinstance(model, GaussianNoise):
        return H.matrix.T @ ((y - b) / model.sigma2)
    return H.matrix.T @ (_poisson_ratio(b, y) - 1.0)


def hessian_log_likelihood(model, H: SystemMatrix, v, y) -> np.ndarray:
    """Hessian of the log-likelihood; Gaussian is y-independent."""
    y = np.asarray(y, dtype=float)
    M = H.matrix
    if isinstance(model, GaussianNoise):
        return -(M.T @ M) / model.sigma2
    b = _rates(model, H, v)
    w = _poisson_ratio(b, y) / np.where(b > 0, b, 1.0)
    return -(M.T @ (w[:, None] * M))
