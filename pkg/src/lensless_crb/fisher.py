"""Fisher information matrices and Cramér-Rao bound extraction.

Closed forms:

* Gaussian: J = H^T H / sigma2 (object-independent).
* Poisson:  J = H^T diag(1 / (H v + background)) H.

A Monte Carlo estimator built from sampled score outer products serves as an
independent oracle for both closed forms. The CRB is the diagonal of the
inverse Fisher matrix, computed through a Cholesky factorization of J + eps*I
with a relative epsilon so Gaussian and Poisson scales both behave.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import FactorizationError, SingularRateError
from .forward_model import SystemMatrix, VectorizedObject

MC_CHUNK = 20_000


@dataclass(frozen=True)
class FisherMatrix:
    entries: np.ndarray     # (d, d) symmetric PSD
    provenance: str         # "gaussian" | "poisson" | "monte-carlo"
    n_samples: int | None = None

    @property
    def d(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class EpsilonPolicy:
    """Diagonal loading used before inversion: eps = relative * max(diag(J)),
    unless an absolute override is given."""

    relative: float = 1e-9
    absolute: float | None = None

    def value(self, J: np.ndarray) -> float:
        if self.absolute is not None:
            return float(self.absolute)
        peak = float(np.max(np.diag(J)))
        return self.relative * peak if peak > 0 else self.relative


@dataclass(frozen=True)
class CrbMap:
    """Per-object-pixel lower bounds on unbiased estimator variance (photons^2)."""

    values: np.ndarray            # 1-D, length d, >= 0
    epsilon_used: float
    object_shape: tuple[int, int]

    def grid(self) -> np.ndarray:
        return self.values.reshape(self.object_shape)


def _vals(v):
    return v.values if isinstance(v, VectorizedObject) else np.asarray(v, dtype=float)


def fisher_gaussian(H: SystemMatrix, sigma2: float) -> FisherMatrix:
    """Closed-form Fisher matrix for i.i.d. Gaussian noise."""
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    M = H.matrix
    J = (M.T @ M) / sigma2
    return FisherMatrix(entries=0.5 * (J + J.T), provenance="gaussian")


def fisher_poisson(H: SystemMatrix, v, background: float = 0.0) -> FisherMatrix:
    """Closed-form Fisher matrix for Poisson noise at object v."""
    rate = H.matrix @ _vals(v) + background
    if np.any(rate <= 0):
        raise SingularRateError(int(np.argmax(rate <= 0)))
    M = H.matrix
    J = M.T @ (M / rate[:, None])
    return FisherMatrix(entries=0.5 * (J + J.T), provenance="poisson")


def fisher_monte_carlo(model, H: SystemMatrix, v, n_samples: int,
                       seed: int = 0) -> FisherMatrix:
    """Monte Carlo Fisher estimate: mean of score outer products.

    Samples are drawn in fixed-size chunks with seeds spawned per chunk, so
    the result depends only on (model, H, v, n_samples, seed).
    """
    from .noise import GaussianNoise, PoissonNoise

    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    M = H.matrix
    b = M @ _vals(v)
    ss = np.random.SeedSequence(seed)
    n_chunks = (n_samples + MC_CHUNK - 1) // MC_CHUNK
    children = ss.spawn(n_chunks)
    J = np.zeros((H.d, H.d))
    done = 0
    for child in children:
        m = min(MC_CHUNK, n_samples - done)
        rng = np.random.default_rng(child)
        if isinstance(model, GaussianNoise):
            noise = rng.normal(0.0, np.sqrt(model.sigma2), size=(m, H.k))
            S = (noise / model.sigma2) @ M
        elif isinstance(model, PoissonNoise):
            rate = b + model.background
            Y = rng.poisson(rate, size=(m, H.k)).astype(float)
            bad = (rate == 0) & np.any(Y > 0, axis=0)
            if np.any(bad):
                raise SingularRateError(int(np.argmax(bad)))
            R = np.where(Y > 0, Y / np.where(rate > 0, rate, 1.0), 0.0) - 1.0
            S = R @ M
        else:
            raise TypeError(f"unknown noise model: {model!r}")
        J += S.T @ S
        done += m
    J /= n_samples
    return FisherMatrix(entries=0.5 * (J + J.T), provenance="monte-carlo",
                        n_samples=n_samples)


def crb_from_fisher(J: FisherMatrix, epsilon: EpsilonPolicy = EpsilonPolicy(),
                    object_shape=None) -> CrbMap:
    """diag((J + eps*I)^-1) via Cholesky; the epsilon actually used is recorded."""
    A = np.array(J.entries, dtype=float)
    eps = epsilon.value(A)
    A[np.diag_indices_from(A)] += eps
    try:
        c = cho_factor(A, lower=True)
    except LinAlgError as exc:
        raise FactorizationError(eps, f"CRB factorization failed (eps={eps!r}): {exc}")
    inv = cho_solve(c, np.eye(A.shape[0]))
    values = np.diag(inv).copy()
    if object_shape is None:
        side = int(round(np.sqrt(J.d)))
        if side * side != J.d:
            raise ValueError("object_shape required for non-square objects")
        object_shape = (side, side)
    return CrbMap(values=values, epsilon_used=eps,
                  object_shape=(int(object_shape[0]), int(object_shape[1])))


def crb_summary(cmap: CrbMap) -> dict:
    """Summary statistics plus the central-row cross-section of the CRB map."""
    grid = cmap.grid()
    return {
        "mean": float(np.mean(grid)),
        "median": float(np.median(grid)),
        "max": float(np.max(grid)),
        "cross_section": grid[grid.shape[0] // 2].copy(),
    }
