"""Reference decoders and the Monte Carlo trial runner.

Three estimators probe the bounds empirically:

* Unconstrained least squares (closed form): unbiased and efficient under
  Gaussian noise, so its variance should sit on the CRB.
* Non-negative least squares via projected gradient descent.
* Poisson maximum likelihood via Richardson-Lucy multiplicative updates,
  which preserve positivity and never decrease the likelihood.

``run_trials`` repeats sample -> estimate over many seeds and accumulates
per-pixel mean/variance with chunked Welford merges, so the statistics are
independent of chunk size and thread count.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import FactorizationError
from .fisher import CrbMap, EpsilonPolicy
from .forward_model import SystemMatrix, VectorizedObject
from .noise import GaussianNoise, PoissonNoise, sample

DEFAULT_TRIAL_CHUNK = 1000


def _vals(v):
    return v.values if isinstance(v, VectorizedObject) else np.asarray(v, dtype=float)


# ---------------------------------------------------------------------------
# Least squares
# ---------------------------------------------------------------------------


def make_gls_solver(H: SystemMatrix, epsilon: EpsilonPolicy = EpsilonPolicy()):
    """Factor (H^T H + eps*I) once; return a solver mapping y -> v.

    The solver accepts y of shape (k,) or (k, n) and may return negatives.
    """
    M = H.matrix
    A = M.T @ M
    eps = epsilon.value(A)
    A[np.diag_indices_from(A)] += eps
    try:
        c = cho_factor(A, lower=True)
    except LinAlgError as exc:
        raise FactorizationError(eps, f"normal equations not SPD (eps={eps!r}): {exc}")

    def solve(y):
        return cho_solve(c, M.T @ np.asarray(y, dtype=float))

    return solve


def gls_estimate(H: SystemMatrix, sigma2: float, y,
                 epsilon: EpsilonPolicy = EpsilonPolicy()) -> np.ndarray:
    """argmin ||y - Hv||^2, non-negativity NOT enforced.

    Under i.i.d. noise the weighting sigma2 cancels; the argument is kept so
    call sites state the model they assume.
    """
    del sigma2
    return make_gls_solver(H, epsilon)(y)


# ---------------------------------------------------------------------------
# Non-negative least squares
# ---------------------------------------------------------------------------


class NnlsResult(NamedTuple):
    values: np.ndarray
    converged: bool
    n_iters: int


def _largest_eigenvalue(A, iters=100):
    x = np.ones(A.shape[0])
    for _ in range(iters):
        x = A @ x
        x /= np.linalg.norm(x)
    return float(x @ (A @ x))


def nnls_estimate(H: SystemMatrix, y, max_iters: int = 5000,
                  tol: float = 1e-9) -> NnlsResult:
    """Projected gradient descent on ||y - Hv||^2 with v >= 0.

    Step 1/L with L the largest eigenvalue of H^T H (power iteration);
    stops when the relative objective decrease drops below tol. Supports
    y of shape (k,) or (k, n); non-convergence returns the last iterate
    with converged=False.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    M = H.matrix
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    Y = y[:, None] if single else y
    A = M.T @ M
    L = _largest_eigenvalue(A)
    MtY = M.T @ Y
    V = np.zeros((H.d, Y.shape[1]))
    active = np.ones(Y.shape[1], dtype=bool)
    obj = np.sum(Y ** 2, axis=0)
    it = 0
    while it < max_iters and np.any(active):
        idx = np.flatnonzero(active)       # converged columns stop updating
        Va = V[:, idx]
        grad = A @ Va - MtY[:, idx]        # half-gradient of the objective
        Va = np.maximum(Va - grad / L, 0.0)
        V[:, idx] = Va
        new_obj = np.sum((Y[:, idx] - M @ Va) ** 2, axis=0)
        rel_drop = (obj[idx] - new_obj) / np.maximum(obj[idx], 1e-300)
        active[idx[rel_drop < tol]] = False
        obj[idx] = new_obj
        it += 1
    result = V[:, 0] if single else V
    return NnlsResult(result, converged=not np.any(active), n_iters=it)


# ---------------------------------------------------------------------------
# Poisson maximum likelihood (Richardson-Lucy)
# ---------------------------------------------------------------------------


class MleResult(NamedTuple):
    values: np.ndarray
    converged: bool
    n_iters: int
    loglik_trace: np.ndarray   # per-iteration ln p(y; v), additive constant dropped


def _poisson_objective(Y, B):
    """Sum of y ln b - b per column; the -ln(y!) constant is omitted."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(Y > 0, Y * np.log(np.maximum(B, 1e-300)), 0.0)
    return np.sum(t - B, axis=0)


def poisson_mle(H: SystemMatrix, y, background: float = 0.0,
                max_iters: int = 10_000, tol: float = 1e-10) -> MleResult:
    """Richardson-Lucy iterations for the Poisson likelihood.

    v <- v * [H^T (y / (Hv + background))] / H^T 1, started uniform positive;
    stops when the relative log-likelihood change drops below tol. Supports
    y of shape (k,) or (k, n).
    """
    M = H.matrix
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    Y = y[:, None] if single else y
    if np.any(Y < 0):
        raise ValueError("Poisson measurements must be non-negative")
    colsum = M.sum(axis=0)
    if np.any(colsum == 0):
        raise ValueError("system matrix has a zero column sum")

    n_cols = Y.shape[1]
    V = np.full((H.d, n_cols), max(Y.mean() / colsum.mean(), 1e-12))
    obj = _poisson_objective(Y, M @ V + background)
    trace = [obj.copy()]
    active = np.ones(n_cols, dtype=bool)
    it = 0
    while it < max_iters and np.any(active):
        idx = np.flatnonzero(active)       # converged columns stop updating
        Va, Ya = V[:, idx], Y[:, idx]
        B = M @ Va + background
        ratio = np.where(Ya > 0, Ya / np.maximum(B, 1e-300), 0.0)
        Va = Va * ((M.T @ ratio) / colsum[:, None])
        V[:, idx] = Va
        new_obj = _poisson_objective(Ya, M @ Va + background)
        rel = np.abs(new_obj - obj[idx]) / np.maximum(np.abs(obj[idx]), 1e-300)
        active[idx[rel < tol]] = False
        obj[idx] = new_obj
        trace.append(obj.copy())
        it += 1
    trace = np.array(trace)
    if single:
        return MleResult(V[:, 0], not np.any(active), it, trace[:, 0])
    return MleResult(V, not np.any(active), it, trace)


# ---------------------------------------------------------------------------
# Trial runner
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrialReport:
    n_trials: int
    per_pixel_mean: np.ndarray
    per_pixel_variance: np.ndarray
    per_pixel_bias: np.ndarray
    crb: CrbMap | None
    efficiency: np.ndarray | None   # variance / CRB, elementwise
    n_failed: int = 0


def _merge_moments(n1, mean1, m2_1, n2, mean2, m2_2):
    """Combine two (count, mean, sum-of-squared-deviations) states."""
    n = n1 + n2
    delta = mean2 - mean1
    mean = mean1 + delta * (n2 / n)
    m2 = m2_1 + m2_2 + delta * delta * (n1 * n2 / n)
    return n, mean, m2


def _estimate_chunk(estimator, model, H, Y, options):
    if estimator == "gls":
        raise RuntimeError("gls handled by prebuilt solver")   # pragma: no cover
    if estimator == "nnls":
        return nnls_estimate(H, Y, **options).values
    if estimator == "mle":
        background = model.background if isinstance(model, PoissonNoise) else 0.0
        return poisson_mle(H, Y, background=background, **options).values
    raise ValueError(f"unknown estimator: {estimator!r}")


def run_trials(model, H: SystemMatrix, v_true, estimator: str, n_trials: int,
               seed: int, crb: CrbMap | None = None,
               chunk_size: int = DEFAULT_TRIAL_CHUNK,
               estimator_options: dict | None = None) -> TrialReport:
    """Sample -> estimate n_trials times; report per-pixel moments and efficiency.

    Trial i uses seed ``seed + i`` so any subset of trials is reproducible.
    Estimates containing non-finite values count as failures; more than 1%
    failures aborts the run.
    """
    if n_trials < 2:
        raise ValueError("n_trials must be >= 2")
    v = _vals(v_true)
    b = H.matrix @ v
    options = estimator_options or {}
    solver = make_gls_solver(H) if estimator == "gls" else None

    n_acc, mean_acc, m2_acc = 0, np.zeros(H.d), np.zeros(H.d)
    n_failed = 0
    for start in range(0, n_trials, chunk_size):
        m = min(chunk_size, n_trials - start)
        Y = np.empty((H.k, m))
        for i in range(m):
            Y[:, i] = sample(model, b, seed + start + i)
        V = (solver(Y) if solver is not None
             else _estimate_chunk(estimator, model, H, Y, options))
        ok = np.all(np.isfinite(V), axis=0)
        n_failed += int(m - ok.sum())
        V = V[:, ok]
        if V.shape[1] == 0:
            continue
        c_n = V.shape[1]
        c_mean = V.mean(axis=1)
        c_m2 = np.sum((V - c_mean[:, None]) ** 2, axis=1)
        n_acc, mean_acc, m2_acc = _merge_moments(n_acc, mean_acc, m2_acc,
                                                 c_n, c_mean, c_m2)
    if n_failed > 0.01 * n_trials:
        raise RuntimeError(f"{n_failed}/{n_trials} estimator failures")
    variance = m2_acc / (n_acc - 1)
    bias = mean_acc - v
    efficiency = None
    if crb is not None:
        with np.errstate(divide="ignore", invalid="ignore"):
            efficiency = np.where(crb.values > 0, variance / crb.values, np.inf)
    return TrialReport(n_trials=n_acc, per_pixel_mean=mean_acc,
                       per_pixel_variance=variance, per_pixel_bias=bias,
                       crb=crb, efficiency=efficiency, n_failed=n_failed)
