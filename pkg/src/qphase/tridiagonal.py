"""Tridiagonal linear solves for the implicit time stepper.

Two interchangeable routes: an explicit Thomas elimination (the reference,
O(n), no pivoting, valid for the diagonally dominant systems the stepper
produces) and LAPACK's banded solver via SciPy (the fast path for long
runs).  Both are exercised against each other in the tests; the stepper
lets the caller pick.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

__all__ = ["solve_tridiagonal", "solve_banded_lapack"]


def solve_tridiagonal(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray,
                      rhs: np.ndarray) -> np.ndarray:
    """Thomas algorithm for  lower[i] u[i-1] + diag[i] u[i] + upper[i] u[i+1] = rhs[i].

    ``lower`` has length n with lower[0] ignored; ``upper`` has length n
    with upper[-1] ignored.  No pivoting: the caller must supply a system
    whose forward elimination never hits a zero pivot (the Cayley-form
    stepping matrices are strictly diagonally dominant, so this holds).
    """
    n = diag.size
    if not (lower.size == upper.size == rhs.size == n):
        raise ValueError("all bands and the rhs must have length n")
    dtype = np.result_type(lower, diag, upper, rhs)
    cp = np.empty(n, dtype=dtype)
    dp_ = np.empty(n, dtype=dtype)
    if diag[0] == 0:
        raise ZeroDivisionError("zero pivot in Thomas elimination")
    cp[0] = upper[0] / diag[0]
    dp_[0] = rhs[0] / diag[0]
    for i in range(1, n):
        denom = diag[i] - lower[i] * cp[i - 1]
        if denom == 0:
            raise ZeroDivisionError("zero pivot in Thomas elimination")
        cp[i] = upper[i] / denom
        dp_[i] = (rhs[i] - lower[i] * dp_[i - 1]) / denom
    u = np.empty(n, dtype=dtype)
    u[-1] = dp_[-1]
    for i in range(n - 2, -1, -1):
        u[i] = dp_[i] - cp[i] * u[i + 1]
    return u


def solve_banded_lapack(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray,
                        rhs: np.ndarray) -> np.ndarray:
    """Same system as :func:`solve_tridiagonal` through LAPACK's gtsv."""
    n = diag.size
    ab = np.zeros((3, n), dtype=np.result_type(lower, diag, upper, rhs))
    ab[0, 1:] = upper[:-1]
    ab[1, :] = diag
    ab[2, :-1] = lower[1:]
    return scipy.linalg.solve_banded((1, 1), ab, rhs)
