"""Guided trajectories: a positive phase space with exact marginals.

Samples initial positions from |psi_0|^2, transports them along the local
velocity field through the barrier, and shows (a) a fan of trajectories
over the density history, (b) the ensemble histogram against |psi(t2)|^2.

Run:  python demos/04_trajectory_ensemble.py
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

import qphase as q

cfg = q.ExperimentConfig(n_traj=20_000)
grid = cfg.grid()
psi0 = q.make_gaussian_packet(grid, cfg.packet())
snapshots = q.evolve(psi0, cfg.potential(), cfg.plan())

starts = q.sample_equilibrium(psi0, cfg.n_traj, cfg.seed)
out_times = tuple(np.round(np.arange(0.0, 300.1, 5.0), 9))
ens = q.integrate_trajectories(snapshots, starts, cfg.mass_m0, cfg.traj_substep_fs,
                               output_times=out_times, seed=cfg.seed)
print(f"aborted: {ens.aborted_fraction:.2%}, monotone repairs: {ens.repair_events}")

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
show = slice(0, cfg.n_traj, cfg.n_traj // 120)
for i in range(*show.indices(cfg.n_traj)):
    ax1.plot(ens.positions[i, :], out_times, lw=0.3, color="tab:blue", alpha=0.5)
ax1.axvspan(147.6, 152.4, color="0.85")
ax1.set_xlim(0, 300)
ax1.set_xlabel("x (nm)")
ax1.set_ylabel("t (fs)")
ax1.set_title("trajectory fan (every 120th path)")

psi2 = dict(snapshots)[300.0]
dec = cfg.bohm_decimate
edges = grid.x_min + dec * grid.dx * np.arange(grid.n // dec + 1)
xs = ens.positions[:, -1]
xs = xs[~np.isnan(xs)]
counts, _ = np.histogram(xs, bins=edges)
centers = edges[:-1]
ax2.step(centers, counts / xs.size / (dec * grid.dx), where="post", lw=0.8,
         label="ensemble histogram")
ax2.plot(grid.points, psi2.density(), lw=0.8, label=r"$|\psi(t_2)|^2$")
ax2.set_xlim(0, 300)
ax2.set_xlabel("x (nm)")
ax2.legend(fontsize=8)
ax2.set_title("equilibrium transport reproduces the density")
fig.tight_layout()
fig.savefig("demo04_trajectory_ensemble.png", dpi=150)
print("wrote demo04_trajectory_ensemble.png")
