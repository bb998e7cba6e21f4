"""Shared fixtures: the full default run is expensive, so compute it once."""

import numpy as np
import pytest

import qphase as q


@pytest.fixture(scope="session")
def default_cfg(tmp_path_factory):
    out = tmp_path_factory.mktemp("default_run")
    return q.ExperimentConfig(output_dir=str(out))


@pytest.fixture(scope="session")
def barrier_run(default_cfg):
    """Report plus in-memory snapshots, fields and ensemble of the default run."""
    report, extras = q.run_experiment(default_cfg, keep_fields=True)
    return default_cfg, report, extras


@pytest.fixture(scope="session")
def small_grid():
    return q.SpatialGrid(-150.0, 450.0, 1024)


@pytest.fixture(scope="session")
def small_packet(small_grid):
    return q.make_gaussian_packet(small_grid, q.PacketParams(7.5, 100.0, 0.69))


def free_gaussian(grid, a0, x0, k0, mass, t):
    """Analytic dispersing Gaussian, sampled on the grid and renormalized.

    Independent closed form used as an oracle: complex width 1 + i tau,
    tau = hbar t / (2 m a0^2), drift at v0 = hbar k0 / m.
    """
    m_abs = mass * q.ELECTRON_MASS
    v0 = q.HBAR * k0 / m_abs
    tau = q.HBAR * t / (2.0 * m_abs * a0**2)
    x = grid.points
    drifted = x - x0 - v0 * t
    psi = (
        (2.0 * np.pi * a0**2) ** -0.25
        / np.sqrt(1.0 + 1j * tau)
        * np.exp(1j * (k0 * (x - x0) - q.HBAR * k0**2 * t / (2.0 * m_abs)))
        * np.exp(-(drifted**2) / (4.0 * a0**2 * (1.0 + 1j * tau)))
    )
    return q.WaveFunction.from_samples(grid, psi)


def free_gaussian_velocity(x, a0, x0, k0, mass, t):
    """Velocity field of the dispersing Gaussian (linear in x)."""
    m_abs = mass * q.ELECTRON_MASS
    v0 = q.HBAR * k0 / m_abs
    c = q.HBAR / (2.0 * m_abs * a0**2)
    tau = c * t
    return v0 + c * tau * (x - x0 - v0 * t) / (1.0 + tau**2)


def free_gaussian_trajectory(x_start, a0, x0, k0, mass, t):
    """Closed-form guided path: x(t) = x0 + v0 t + (x(0) - x0) sqrt(1 + tau^2)."""
    m_abs = mass * q.ELECTRON_MASS
    v0 = q.HBAR * k0 / m_abs
    tau = q.HBAR * t / (2.0 * m_abs * a0**2)
    return x0 + v0 * t + (x_start - x0) * np.sqrt(1.0 + tau**2)


def cat_state(grid, a, d, center=150.0):
    """Two coherent lobes at center +- d; interference lives midway."""
    x = grid.points
    g_plus = np.exp(-((x - center - d) ** 2) / (4.0 * a**2))
    g_minus = np.exp(-((x - center + d) ** 2) / (4.0 * a**2))
    return q.WaveFunction.from_samples(grid, g_plus + g_minus)


def cat_state_wigner_exact(grid, pgrid, a, d, center=150.0):
    """Closed-form transform of the two-lobe state (derived by hand).

    W = [W_g(x-d) + W_g(x+d) + 2 cos(2 p d / hbar) W_g(x)] / (2 (1 + S)),
    with W_g the centered-Gaussian transform and S the lobe overlap
    exp(-d^2 / 2 a^2).
    """
    x = grid.points[:, None] - center
    p = pgrid.points[None, :]

    def wg(xs):
        return (1.0 / (np.pi * q.HBAR)) * np.exp(-(xs**2) / (2.0 * a**2)) * np.exp(
            -2.0 * a**2 * p**2 / q.HBAR**2
        )

    overlap = np.exp(-(d**2) / (2.0 * a**2))
    return (wg(x - d) + wg(x + d) + 2.0 * np.cos(2.0 * p * d / q.HBAR) * wg(x)) / (
        2.0 * (1.0 + overlap)
    )
