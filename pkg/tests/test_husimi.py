"""Husimi field: positivity, route equivalence, smoothed-marginal laws."""

import numpy as np
import pytest

import qphase as q
from conftest import cat_state

MASS = 0.2
A0 = 7.5


@pytest.fixture(scope="module")
def plan(small_grid):
    return q.WignerTransformPlan(small_grid)


@pytest.fixture(scope="module")
def probe():
    return q.CoherentProbe(7.5)


def test_probe_states_have_unit_norm(small_grid, probe):
    x = small_grid.points
    for center, p in [(100.0, 0.0), (222.0, 0.3), (40.0, -0.5)]:
        g = probe.envelope(x, center) * np.exp(1j * p * x / q.HBAR)
        assert np.sum(np.abs(g) ** 2) * small_grid.dx == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(ValueError):
        q.CoherentProbe(0.0)


def test_gaussian_husimi_moments(small_grid, small_packet, plan, probe):
    # with s = a0 the distribution is Gaussian with Var(x) = 2 a0^2 and
    # Var(p) = hbar^2 / (2 a0^2); closed-form overlap integral
    H = q.husimi_direct(small_packet, probe, plan.pgrid)
    x = small_grid.points[:, None]
    p = plan.pgrid.points[None, :]
    w = H.values * small_grid.dx * plan.pgrid.dp
    mx = float((x * w).sum())
    vx = float(((x - mx) ** 2 * w).sum())
    mp = float((p * w).sum())
    vp = float(((p - mp) ** 2 * w).sum())
    assert vx == pytest.approx(2 * A0**2, rel=5e-3)
    assert vp == pytest.approx(q.HBAR**2 / (2 * A0**2), rel=5e-3)
    assert mx == pytest.approx(100.0, abs=1e-6)
    assert mp == pytest.approx(q.HBAR * 0.69, abs=1e-8)


def test_nonnegative_even_where_wigner_is_not(small_grid, plan, probe):
    psi = cat_state(small_grid, 6.0, 40.0)
    W = q.wigner_transform(psi, plan)
    assert W.values.min() < 0
    H1 = q.husimi_direct(psi, probe, plan.pgrid)
    H2 = q.husimi_from_wigner(W, probe)
    assert H1.values.min() >= 0.0
    assert H2.values.min() >= 0.0


@pytest.mark.parametrize("case", ["packet", "cat", "boosted_pair"])
def test_route_equivalence(small_grid, small_packet, plan, probe, case):
    if case == "packet":
        psi = small_packet
    elif case == "cat":
        psi = cat_state(small_grid, 6.0, 40.0)
    else:
        x = small_grid.points
        two = (np.exp(-((x - 120.0) ** 2) / (4 * 9.0**2)) * np.exp(1j * 0.5 * x)
               + 0.6 * np.exp(-((x - 220.0) ** 2) / (4 * 14.0**2)) * np.exp(-1j * 0.4 * x))
        psi = q.WaveFunction.from_samples(small_grid, two)
    Hd = q.husimi_direct(psi, probe, plan.pgrid)
    Hc = q.husimi_from_wigner(q.wigner_transform(psi, plan), probe)
    assert np.abs(Hd.values - Hc.values).max() < 1e-6 * Hd.values.max()


def test_variance_addition_on_gaussians(small_grid, plan):
    # smoothing a coherent Gaussian adds the probe variances
    for s in (4.0, 7.5, 12.0):
        probe = q.CoherentProbe(s)
        psi = q.make_gaussian_packet(small_grid, q.PacketParams(A0, 150.0, 0.3))
        H = q.husimi_direct(psi, probe, plan.pgrid)
        x = small_grid.points[:, None]
        p = plan.pgrid.points[None, :]
        w = H.values * small_grid.dx * plan.pgrid.dp
        vx = float(((x - (x * w).sum()) ** 2 * w).sum())
        vp = float(((p - (p * w).sum()) ** 2 * w).sum())
        assert vx == pytest.approx(A0**2 + s**2, rel=5e-3)
        sigma_p0 = q.HBAR / (2 * A0)
        assert vp == pytest.approx(sigma_p0**2 + (q.HBAR / (2 * s)) ** 2, rel=5e-3)


def test_marginals_match_smoothed_oracle(small_grid, small_packet, plan, probe):
    H = q.husimi_direct(small_packet, probe, plan.pgrid)
    q_h = q.marginal_position(H)
    j_h = q.marginal_momentum_flux(H, MASS)
    q_ref, j_ref = q.husimi_marginal_oracle(small_packet, probe, MASS)
    assert np.abs(q_h - q_ref).max() < 1e-6 * q_ref.max()
    assert np.abs(j_h - j_ref).max() < 1e-6 * np.abs(j_ref).max()
    # constant-velocity state: the gradient factors out of the smoothing
    v0 = q.HBAR * 0.69 / (MASS * q.ELECTRON_MASS)
    assert np.abs(j_ref - v0 * q_ref).max() < 1e-10 * np.abs(j_ref).max()


def test_smoothed_charge_biased_until_probe_shrinks(small_grid, small_packet, plan):
    rho = small_packet.density()
    dx = small_grid.dx
    # wide probe: visible bias equal to the smoothing residue
    probe = q.CoherentProbe(7.5)
    H = q.husimi_direct(small_packet, probe, plan.pgrid)
    bias = np.sum(np.abs(q.marginal_position(H) - rho)) * dx
    residue = np.sum(np.abs(q.smooth_with_probe(rho, dx, probe) - rho)) * dx
    assert bias > 1e-2
    assert bias == pytest.approx(residue, abs=1e-6)
    # narrow probe: the kernel tends to a delta and the bias collapses to
    # the s^2 rho'' smoothing residue, here about 1e-2
    narrow = q.CoherentProbe(2 * dx)
    Hn = q.husimi_direct(small_packet, narrow, plan.pgrid)
    bias_n = np.sum(np.abs(q.marginal_position(Hn) - rho)) * dx
    assert bias_n < 0.02
    assert bias_n < bias / 20


def test_probe_resolution_rejection(small_grid, plan, small_packet):
    with pytest.raises(ValueError, match="resolved"):
        q.husimi_direct(small_packet, q.CoherentProbe(0.5 * small_grid.dx), plan.pgrid)
    huge = q.CoherentProbe(2000.0)  # sigma_p below 2 dp
    with pytest.raises(ValueError, match="resolved"):
        q.husimi_direct(small_packet, huge, plan.pgrid)


def test_barrier_run_husimi_positive_and_biased(barrier_run):
    _, report, extras = barrier_run
    for t, bundle in extras["fields"].items():
        H = bundle["husimi"]
        assert H.values.min() >= -1e-12
        assert report.entries["husimi"][f"{t:g}"]["q_error_l1"] > 1e-2


def test_band_smoothed_but_positive_at_center(barrier_run):
    # midway between the split lobes the smoothed field stays strictly
    # positive while the signed field cancels there
    cfg, _, extras = barrier_run
    H2 = extras["fields"][300.0]["husimi"]
    x = H2.xgrid.points
    i_c = np.argmin(np.abs(x - cfg.barrier_center_nm))
    q_c = H2.values[i_c].sum() * H2.pgrid.dp
    assert q_c > 0
    assert q_c < 1e-2 * q.marginal_position(H2).max()
