"""Thomas elimination against dense and LAPACK references."""

import numpy as np
import pytest

from qphase import tridiagonal


def _random_system(n, rng, dtype=complex):
    lower = rng.standard_normal(n) + (1j * rng.standard_normal(n) if dtype is complex else 0)
    upper = rng.standard_normal(n) + (1j * rng.standard_normal(n) if dtype is complex else 0)
    diag = 4.0 + rng.standard_normal(n) + (1j * rng.standard_normal(n) if dtype is complex else 0)
    rhs = rng.standard_normal(n) + (1j * rng.standard_normal(n) if dtype is complex else 0)
    return lower, diag, upper, rhs


def _dense(lower, diag, upper):
    n = diag.size
    M = np.diag(diag)
    M += np.diag(upper[:-1], 1)
    M += np.diag(lower[1:], -1)
    return M


@pytest.mark.parametrize("n", [16, 101, 1024])
def test_thomas_matches_dense_solve(n):
    rng = np.random.default_rng(7 + n)
    lower, diag, upper, rhs = _random_system(n, rng)
    u = tridiagonal.solve_tridiagonal(lower, diag, upper, rhs)
    ref = np.linalg.solve(_dense(lower, diag, upper), rhs)
    assert np.abs(u - ref).max() < 1e-11 * np.abs(ref).max()


def test_thomas_matches_lapack_banded():
    rng = np.random.default_rng(11)
    lower, diag, upper, rhs = _random_system(513, rng)
    u1 = tridiagonal.solve_tridiagonal(lower, diag, upper, rhs)
    u2 = tridiagonal.solve_banded_lapack(lower, diag, upper, rhs)
    assert np.abs(u1 - u2).max() < 1e-11 * np.abs(u2).max()


def test_zero_pivot_raises():
    n = 8
    lower = np.ones(n)
    upper = np.ones(n)
    diag = np.ones(n)
    diag[0] = 0.0
    with pytest.raises(ZeroDivisionError):
        tridiagonal.solve_tridiagonal(lower, diag, upper, np.ones(n))


def test_stepping_matrix_form():
    # the Cayley stepping system: strictly diagonally dominant complex
    n = 256
    kin = 10.0
    lam = 0.05j
    diag = 1.0 + lam * (2 * kin + np.linspace(0, 0.2, n))
    off = np.full(n, -lam * kin)
    rng = np.random.default_rng(3)
    rhs = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    u1 = tridiagonal.solve_tridiagonal(off, diag, off, rhs)
    u2 = tridiagonal.solve_banded_lapack(off, diag, off, rhs)
    assert np.abs(u1 - u2).max() < 1e-12 * np.abs(u1).max()
