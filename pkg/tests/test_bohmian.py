"""Equilibrium sampling, guided trajectories and the ensemble histogram."""

import numpy as np
import pytest
from scipy import stats

import qphase as q
from conftest import free_gaussian, free_gaussian_trajectory, free_gaussian_velocity

MASS = 0.2
V0 = q.HBAR * 0.69 / (MASS * q.ELECTRON_MASS)


def test_sampling_moments(small_packet):
    n = 100_000
    xs = q.sample_equilibrium(small_packet, n, seed=99)
    assert xs.size == n
    assert abs(xs.mean() - 100.0) < 100.0 / np.sqrt(n)
    # variance of the sample variance for a Gaussian: Var ~ sigma^4 * 2/n
    assert abs(xs.var() - 56.25) < 3 * 56.25 * np.sqrt(2.0 / n)


def test_sampling_single_draw(small_packet):
    xs = q.sample_equilibrium(small_packet, 1, seed=1)
    assert xs.shape == (1,)
    assert 40.0 < xs[0] < 160.0  # inside the packet support


def test_sampling_determinism(small_packet):
    a = q.sample_equilibrium(small_packet, 1000, seed=42)
    b = q.sample_equilibrium(small_packet, 1000, seed=42)
    c = q.sample_equilibrium(small_packet, 1000, seed=43)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sampling_ks_statistic(small_packet):
    n = 100_000
    xs = q.sample_equilibrium(small_packet, n, seed=7)
    grid = small_packet.grid
    w = small_packet.density() * grid.dx
    cdf_nodes = np.concatenate([[0.0], np.cumsum(w)])
    cdf_nodes /= cdf_nodes[-1]
    edges = np.concatenate([[grid.x_min], grid.x_min + grid.dx * (np.arange(grid.n) + 1)])

    def model_cdf(v):
        return np.interp(v, edges, cdf_nodes)

    res = stats.kstest(xs, model_cdf)
    assert res.pvalue > 0.01


def test_velocity_field_constant_for_boosted_packet(small_packet):
    snap = q.velocity_field(small_packet, MASS)
    assert np.abs(snap.v[snap.valid] - V0).max() < 1e-9


def test_velocity_field_zero_for_real_state(small_grid):
    psi = q.make_gaussian_packet(small_grid, q.PacketParams(7.5, 100.0, 0.0))
    snap = q.velocity_field(psi, MASS)
    assert np.abs(snap.v).max() < 1e-12


def test_velocity_field_free_gaussian_analytic(small_grid):
    t = 60.0
    psi = free_gaussian(small_grid, 7.5, 100.0, 0.69, MASS, t)
    snap = q.velocity_field(psi, MASS)
    ref = free_gaussian_velocity(small_grid.points, 7.5, 100.0, 0.69, MASS, t)
    err = np.abs(snap.v - ref)[snap.valid].max()
    assert err < 1e-3


def _free_snapshots(grid, spacing, t_end, a0=7.5, x0=100.0, k0=0.69):
    times = np.round(np.arange(0.0, t_end + 1e-9, spacing), 9)
    return [(float(t), free_gaussian(grid, a0, x0, k0, MASS, float(t))) for t in times]


def test_single_trajectory_free_motion(small_grid):
    snaps = _free_snapshots(small_grid, 1.0, 100.0)
    ens = q.integrate_trajectories(snaps, np.array([100.0]), MASS, substep=0.25,
                                   output_times=(100.0,))
    # the packet-center path moves at the group velocity
    assert abs(ens.positions[0, 0] - (100.0 + V0 * 100.0)) < 1e-3
    assert ens.momenta[0, 0] == pytest.approx(MASS * q.ELECTRON_MASS * V0, abs=1e-6)


def test_offcenter_trajectory_matches_closed_form(small_grid):
    snaps = _free_snapshots(small_grid, 0.5, 80.0)
    starts = np.array([85.0, 95.0, 105.0, 118.0])
    ens = q.integrate_trajectories(snaps, starts, MASS, substep=0.125, output_times=(80.0,))
    ref = free_gaussian_trajectory(starts, 7.5, 100.0, 0.69, MASS, 80.0)
    assert np.abs(ens.positions[:, 0] - ref).max() < 2e-3


def test_momentum_is_mass_times_local_velocity(small_grid):
    snaps = _free_snapshots(small_grid, 1.0, 20.0)
    starts = np.linspace(80.0, 120.0, 7)
    ens = q.integrate_trajectories(snaps, starts, MASS, substep=0.25,
                                   output_times=(0.0, 20.0))
    for k, t in enumerate(ens.times):
        vf = q.velocity_field(dict(snaps)[t], MASS)
        v_here = np.interp(ens.positions[:, k], small_grid.points, vf.v)
        assert np.array_equal(ens.momenta[:, k], MASS * q.ELECTRON_MASS * v_here)


def test_substep_convergence_order(small_grid):
    # fixed snapshot interpolant, halving substeps: differences shrink at
    # the integrator's own order (the free-packet field is linear in x,
    # so the interpolation is exact and does not mask it).  Substeps are
    # kept large enough that the h^4 term stays above roundoff.
    snaps = _free_snapshots(small_grid, 2.0, 100.0)
    starts = np.array([82.0, 90.0, 112.0])
    sols = [
        q.integrate_trajectories(snaps, starts, MASS, substep=h, output_times=(100.0,)).positions[:, 0]
        for h in (2.0, 1.0, 0.5)
    ]
    d1 = np.abs(sols[0] - sols[1]).max()
    d2 = np.abs(sols[1] - sols[2]).max()
    order = np.log2(d1 / d2)
    assert order >= 3.5


def test_spacing_precondition(small_grid):
    snaps = _free_snapshots(small_grid, 1.0, 4.0)
    with pytest.raises(ValueError, match="spacing"):
        q.integrate_trajectories(snaps, np.array([100.0]), MASS, substep=0.03)


def test_wide_node_abort_and_cap(small_grid):
    # two far lobes: the gap between them is an invalid region much wider
    # than three cells; walkers placed there must abort and be counted
    x = small_grid.points
    lobes = np.exp(-((x - 60.0) ** 2) / (4 * 6.0**2)) + np.exp(-((x - 240.0) ** 2) / (4 * 6.0**2))
    psi = q.WaveFunction.from_samples(small_grid, lobes.astype(complex))
    snaps = [(0.0, psi), (1.0, psi), (2.0, psi)]
    starts = np.concatenate([np.linspace(50.0, 70.0, 40), [150.0, 152.0]])
    ens = q.integrate_trajectories(snaps, starts, MASS, substep=0.25,
                                   output_times=(2.0,), max_aborted_fraction=0.2)
    assert ens.aborted.sum() == 2
    assert np.isnan(ens.positions[-1, 0]) and np.isnan(ens.positions[-2, 0])
    with pytest.raises(q.TrajectoryError, match="aborted"):
        q.integrate_trajectories(snaps, starts, MASS, substep=0.25,
                                 output_times=(2.0,), max_aborted_fraction=0.01)


def test_histogram_properties(small_grid, small_packet):
    snaps = _free_snapshots(small_grid, 1.0, 10.0)
    xs = q.sample_equilibrium(small_packet, 20_000, seed=5)
    ens = q.integrate_trajectories(snaps, xs, MASS, substep=0.25, output_times=(0.0, 10.0))
    bx = small_grid.decimate(8)
    bp = q.WignerTransformPlan(small_grid).pgrid.decimate(8)
    F = q.bohmian_distribution(ens, 0, bx, bp)
    assert F.values.min() >= 0.0
    assert F.total_mass() == pytest.approx(1.0, abs=1e-12)
    assert F.n_samples == 20_000
    # single-valued guidance: every occupied column sits in the momentum
    # bin of hbar k0
    occupied_x, occupied_p = np.nonzero(F.values)
    target_bin = np.argmin(np.abs(bp.points - q.HBAR * 0.69))
    assert np.all(np.abs(occupied_p - target_bin) <= 1)


def test_equilibrium_histogram_tracks_density(small_grid, small_packet):
    n = 20_000
    xs = q.sample_equilibrium(small_packet, n, seed=13)
    dec = 8
    edges = small_grid.x_min + dec * small_grid.dx * np.arange(small_grid.n // dec + 1)
    counts, _ = np.histogram(xs, bins=edges)
    prob = (small_packet.density() * small_grid.dx).reshape(-1, dec).sum(axis=1)
    occupied = counts > 0
    sigma = np.sqrt(prob * (1 - prob) / n)
    dev = np.abs(counts / n - prob)
    frac3 = np.mean(dev[occupied] <= 3 * sigma[occupied])
    frac5 = np.mean(dev[occupied] <= 5 * sigma[occupied])
    assert frac3 >= 0.98
    assert frac5 == 1.0


def test_marginal_oracles_shared_with_wigner(small_packet):
    qb, jb = q.bohmian_marginal_oracle(small_packet, MASS)
    qw, jw = q.wigner_marginal_oracle(small_packet, MASS)
    assert np.array_equal(qb, qw) and np.array_equal(jb, jw)


def test_barrier_run_trajectories_avoid_structure(barrier_run):
    cfg, _, extras = barrier_run
    ens = extras["ensemble"]
    lo, hi = cfg.barrier_band()
    xs = ens.positions[:, -1]
    xs = xs[~np.isnan(xs)]
    inside = np.mean((xs >= lo) & (xs <= hi))
    assert inside < 1e-3  # density-level occupancy only
    assert ens.aborted_fraction < 1e-3


def test_barrier_run_non_crossing_and_repairs(barrier_run):
    _, _, extras = barrier_run
    ens = extras["ensemble"]
    for k in range(len(ens.times)):
        assert ens.order_violations(k) == 0
    # the monotone projection stays a rare, sub-cell correction
    assert ens.repair_events < 0.05 * ens.n_traj
    assert ens.max_repair < 0.2


def test_convergence_rate_with_ensemble_size(barrier_run):
    cfg, _, extras = barrier_run
    ens = extras["ensemble"]
    psi2 = extras["fields"][300.0]["psi"]
    grid = cfg.grid()
    dec = cfg.bohm_decimate
    edges = grid.x_min + dec * grid.dx * np.arange(grid.n // dec + 1)
    prob = (psi2.density() * grid.dx).reshape(-1, dec).sum(axis=1)
    xs = ens.positions[:, -1]
    xs = xs[~np.isnan(xs)]
    l1 = {}
    for n in (1000, 10_000, 100_000):
        counts, _ = np.histogram(xs[:n], bins=edges)
        l1[n] = np.abs(counts / n - prob).sum()
    for n_small, n_big in [(1000, 10_000), (10_000, 100_000)]:
        ratio = l1[n_small] / l1[n_big]
        ideal = np.sqrt(n_big / n_small)
        assert ideal / 2 <= ratio <= ideal * 2
