"""Equilibrium sampling, guided-trajectory integration and the ensemble histogram.

Trajectories follow dx/dt = v(x, t) with v = (hbar/m) Im(psi* psi') / |psi|^2
evaluated on the solver grid.  Initial positions are drawn from |psi_0|^2
(inverse CDF of its piecewise-linear cumulative, counter-based RNG so the
draw is reproducible and schedule-independent), and the phase-space
histogram realizes the delta-ensemble with one count per trajectory per
(x, p) bin.  Momentum is always m * v(x(t), t), never accumulated by a
second integration.

Integration is classical RK4 with the velocity field interpolated
linearly in x and in t between stored snapshots.  Two safeguards address
the places where a finite step cannot follow the exact flow:

* velocities are clamped to the momentum band edge of the grid
  (|v| <= pi hbar / (2 dx m)); faster values cannot be represented in
  the phase space and only ever appear next to density nodes;
* after every substep the ensemble, kept internally in ascending order,
  is projected back onto the monotone cone (a running-maximum clamp).
  The exact 1D flow is order preserving because the velocity field is
  single valued, so the projection only ever corrects the integrator,
  never the physics; every clamp event is counted and the largest
  displacement recorded on the ensemble for inspection.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .core import (
    ELECTRON_MASS,
    HBAR,
    MomentumGrid,
    PhaseSpaceField,
    PhaseSpaceKind,
    SpatialGrid,
    WaveFunction,
    polar_decompose,
)
from .wigner import wigner_marginal_oracle

__all__ = [
    "TrajectoryEnsemble",
    "VelocityFieldSnapshot",
    "TrajectoryError",
    "sample_equilibrium",
    "velocity_field",
    "integrate_trajectories",
    "bohmian_distribution",
    "bohmian_marginal_oracle",
]


class TrajectoryError(RuntimeError):
    pass


@dataclass(frozen=True)
class VelocityFieldSnapshot:
    """Guiding velocity v(x) in nm/fs at one time, with its validity mask.

    Invalid points (below the node threshold) carry the nearest valid
    value so that linear interpolation never sees a gap; the magnitude is
    clamped to the band-edge velocity of the grid.
    """

    time: float
    v: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.v.flags.writeable = False
        self.valid.flags.writeable = False


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Positions and derived momenta of n_traj trajectories at stored times.

    ``positions[i, k]`` is NaN from the moment trajectory i was aborted
    (it entered a wide node region); ``aborted`` flags those.
    ``repair_events`` counts monotone-projection clamps over the whole
    integration and ``max_repair`` is the largest single clamp in nm.
    """

    n_traj: int
    seed: int
    times: Tuple[float, ...]
    positions: np.ndarray  # [n_traj, n_times], nm
    momenta: np.ndarray    # [n_traj, n_times], hbar / nm
    aborted: np.ndarray    # [n_traj] bool
    repair_events: int = 0
    max_repair: float = 0.0

    def __post_init__(self):
        for arr in (self.positions, self.momenta, self.aborted):
            arr.flags.writeable = False

    @property
    def aborted_fraction(self) -> float:
        return float(self.aborted.mean())

    def order_violations(self, t_index: int) -> int:
        """Strict inversions relative to the initial ordering (alive only)."""
        alive = ~self.aborted
        first = self.positions[alive, 0]
        later = self.positions[alive, t_index]
        order = np.argsort(first, kind="stable")
        return int(np.sum(np.diff(later[order]) < 0))


def sample_equilibrium(psi0: WaveFunction, n_traj: int, seed: int) -> np.ndarray:
    """Draw i.i.d. positions from |psi0|^2 by inverting its cumulative.

    The cumulative is piecewise linear over the grid cells (density
    constant inside a cell); a counter-based Philox stream makes the
    sample a pure function of the seed.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    grid = psi0.grid
    w = psi0.density() * grid.dx
    cdf = np.concatenate([[0.0], np.cumsum(w)])
    cdf /= cdf[-1]
    rng = np.random.Generator(np.random.Philox(seed))
    u = rng.random(n_traj)
    cell = (np.searchsorted(cdf, u, side="right") - 1).clip(0, grid.n - 1)
    slope = np.maximum(cdf[cell + 1] - cdf[cell], 1e-300)
    return grid.x_min + (cell + (u - cdf[cell]) / slope) * grid.dx


def velocity_field(psi: WaveFunction, mass: float,
                   node_threshold: float = 1e-6) -> VelocityFieldSnapshot:
    """Guiding velocity (hbar/m) d(theta)/dx with node fill and band clamp."""
    pol = polar_decompose(psi, node_threshold)
    m_abs = mass * ELECTRON_MASS
    v = (HBAR / m_abs) * np.nan_to_num(pol.phase_gradient)
    if not pol.valid.all():
        idx = np.flatnonzero(pol.valid)
        pos = np.arange(psi.grid.n)
        right = np.searchsorted(idx, pos).clip(1, idx.size - 1)
        left = right - 1
        nearest = np.where(pos - idx[left] <= idx[right] - pos, idx[left], idx[right])
        v = np.where(pol.valid, v, v[nearest])
    v_band = np.pi * HBAR / (2.0 * psi.grid.dx * m_abs)
    np.clip(v, -v_band, v_band, out=v)
    return VelocityFieldSnapshot(time=np.nan, v=v, valid=pol.valid)


def _wide_node_cells(valid: np.ndarray, max_run: int = 3) -> np.ndarray:
    """Cells inside invalid runs longer than max_run cells."""
    invalid = ~valid
    if not invalid.any():
        return np.zeros_like(invalid)
    # run-length encode the invalid mask
    edges = np.flatnonzero(np.diff(np.concatenate([[False], invalid, [False]]).astype(int)))
    starts, stops = edges[::2], edges[1::2]
    wide = np.zeros_like(invalid)
    for a, b in zip(starts, stops):
        if b - a > max_run:
            wide[a:b] = True
    return wide


def integrate_trajectories(
    snapshots: Sequence[Tuple[float, WaveFunction]],
    x_init: np.ndarray,
    mass: float,
    substep: float,
    output_times: Optional[Sequence[float]] = None,
    node_threshold: float = 1e-6,
    wall_amplitude: float = 1e-8,
    max_aborted_fraction: float = 1e-3,
    seed: int = 0,
) -> TrajectoryEnsemble:
    """RK4 transport of x_init through the stored snapshot sequence.

    The snapshots must be uniformly spaced with spacing <= 4 * substep
    (denser snapshots than substeps keep the time-interpolation error
    subordinate), and every requested output time must be a snapshot
    time.  Trajectories that enter an invalid region wider than three
    cells abort and are excluded (their count must stay below
    ``max_aborted_fraction``); trajectories reaching a wall clamp there
    only while the wave amplitude at that wall is below
    ``wall_amplitude`` of the peak, and abort the run otherwise.
    """
    if substep <= 0:
        raise ValueError("substep must be positive")
    times = np.array([t for t, _ in snapshots], dtype=float)
    if times.size < 2:
        raise ValueError("need at least two snapshots")
    spacing = float(times[1] - times[0])
    if not np.allclose(np.diff(times), spacing, rtol=0, atol=1e-9):
        raise ValueError("snapshots must be uniformly spaced")
    if spacing > 4.0 * substep + 1e-12:
        raise ValueError(
            f"snapshot spacing {spacing} exceeds 4 x substep {substep}; "
            "store snapshots at least a quarter as dense as the substep"
        )
    grid = snapshots[0][1].grid
    x = grid.points
    out_times = tuple(float(t) for t in (output_times if output_times is not None else times))
    out_index = {}
    for t in out_times:
        hits = np.flatnonzero(np.isclose(times, t, rtol=0, atol=1e-9))
        if hits.size != 1:
            raise ValueError(f"output time {t} is not a snapshot time")
        out_index[int(hits[0])] = out_times.index(t)

    n_sub = max(1, int(round(spacing / substep)))
    h = spacing / n_sub
    n_traj = x_init.size

    vfields = []
    wides = []
    edge_ok = []
    for t, psi in snapshots:
        snap = velocity_field(psi, mass, node_threshold)
        vfields.append(snap.v)
        wides.append(_wide_node_cells(snap.valid))
        edge_ok.append(psi.edge_amplitude() < wall_amplitude)

    order = np.argsort(x_init, kind="stable")
    inv_order = np.empty_like(order)
    inv_order[order] = np.arange(n_traj)
    pos = x_init[order].astype(float).copy()
    alive = np.ones(n_traj, dtype=bool)

    positions = np.full((n_traj, len(out_times)), np.nan)
    momenta = np.full((n_traj, len(out_times)), np.nan)
    m_abs = mass * ELECTRON_MASS
    repair_events = 0
    max_repair = 0.0
    x_lo, x_hi = x[0], x[-1]

    def cell_of(p):
        return ((p - grid.x_min) / grid.dx).astype(int).clip(0, grid.n - 1)

    def store(k_snap):
        j = out_index.get(k_snap)
        if j is None:
            return
        v_here = np.interp(pos, x, vfields[k_snap])
        positions[order[alive], j] = pos[alive]
        momenta[order[alive], j] = m_abs * v_here[alive]

    def abort_in_wide_nodes(k_snap):
        nonlocal alive
        wide = wides[k_snap]
        if not wide.any():
            return
        hit = alive & wide[cell_of(pos)]
        if hit.any():
            alive = alive & ~hit

    abort_in_wide_nodes(0)
    store(0)
    for k in range(times.size - 1):
        va, vb = vfields[k], vfields[k + 1]
        dv = vb - va
        for s in range(n_sub):
            w0 = s / n_sub
            wh = (s + 0.5) / n_sub
            w1 = (s + 1.0) / n_sub
            k1 = np.interp(pos, x, va + w0 * dv)
            k2 = np.interp(pos + 0.5 * h * k1, x, va + wh * dv)
            k3 = np.interp(pos + 0.5 * h * k2, x, va + wh * dv)
            k4 = np.interp(pos + h * k3, x, va + w1 * dv)
            new = pos + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            # walls: clamp only while the wave has not reached them
            low, high = new < x_lo, new > x_hi
            if (low.any() or high.any()):
                if not (edge_ok[k] and edge_ok[k + 1]):
                    raise TrajectoryError(
                        "trajectory reached a wall while the wave amplitude "
                        "there is not negligible"
                    )
                new = np.clip(new, x_lo, x_hi)
            # monotone projection: the exact flow never crosses
            repaired = np.maximum.accumulate(new)
            moved = repaired > new
            if moved.any():
                repair_events += int(moved.sum())
                max_repair = max(max_repair, float((repaired - new).max()))
            pos = repaired
        abort_in_wide_nodes(k + 1)
        store(k + 1)

    ens = TrajectoryEnsemble(
        n_traj=n_traj,
        seed=seed,
        times=out_times,
        positions=positions,
        momenta=momenta,
        aborted=~alive[inv_order],
        repair_events=repair_events,
        max_repair=max_repair,
    )
    if ens.aborted_fraction > max_aborted_fraction:
        raise TrajectoryError(
            f"{ens.aborted_fraction:.2%} of trajectories aborted in node regions "
            f"(limit {max_aborted_fraction:.2%})"
        )
    return ens


def bohmian_distribution(ens: TrajectoryEnsemble, t_index: int,
                         xgrid: SpatialGrid, pgrid: MomentumGrid) -> PhaseSpaceField:
    """Histogram the ensemble at one stored time into a phase-space field.

    Each binned trajectory contributes 1 / (N dx dp); N is the number of
    trajectories actually binned (aborted ones carry no mass), so the
    field integrates to one exactly.
    """
    xs = ens.positions[:, t_index]
    ps = ens.momenta[:, t_index]
    keep = ~np.isnan(xs)
    xs, ps = xs[keep], ps[keep]
    if xs.size == 0:
        raise ValueError("empty ensemble at the requested time")
    x_edges = xgrid.x_min + xgrid.dx * np.arange(xgrid.n + 1)
    p_edges = pgrid.dp * (np.arange(pgrid.n + 1) - pgrid.n // 2)
    counts, _, _ = np.histogram2d(xs, ps, bins=(x_edges, p_edges))
    binned = counts.sum()
    if binned == 0:
        raise ValueError("no trajectory falls inside the requested grids")
    F = counts / (binned * xgrid.dx * pgrid.dp)
    return PhaseSpaceField(xgrid, pgrid, F, PhaseSpaceKind.BOHMIAN,
                           n_samples=int(binned))


def bohmian_marginal_oracle(psi: WaveFunction, mass: float):
    """Exact ensemble limits: identical to the Wigner marginals by design.

    Q = |psi|^2 (equilibrium transport preserves the density) and
    J = (hbar/m) R^2 d(theta)/dx with p = m v.  Shares the Wigner code
    path so the two oracles are bit-identical.
    """
    return wigner_marginal_oracle(psi, mass)
