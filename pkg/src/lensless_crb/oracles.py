"""Numerical oracles: central finite differences for gradients and Jacobians.

Used by the verify command (and the test suite) to cross-check analytic
scores and Hessians against derivative-free evaluations of the likelihood.
"""

import numpy as np


def fd_gradient(f, x, step: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function at x."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (f(x + e) - f(x - e)) / (2.0 * step)
    return g


def fd_jacobian(g, x, step: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian of a vector function at x."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        cols.append((g(x + e) - g(x - e)) / (2.0 * step))
    return np.stack(cols, axis=1)


def relative_error(approx, exact) -> float:
    """Frobenius-norm relative error of approx against exact."""
    approx = np.asarray(approx, dtype=float)
    exact = np.asarray(exact, dtype=float)
    denom = np.linalg.norm(exact)
    if denom == 0:
        return float(np.linalg.norm(approx))
    return float(np.linalg.norm(approx - exact) / denom)
