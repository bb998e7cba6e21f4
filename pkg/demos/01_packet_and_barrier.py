"""A Gaussian electron packet meets a double barrier.

Builds the standard configuration (0.09 eV packet, two 0.2 eV barriers of
0.8 nm around a 3.2 nm well), evolves it with the unitary stepper and
plots the density at the three reporting times together with the
transmitted fraction.

Run:  python demos/01_packet_and_barrier.py
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

import qphase as q

cfg = q.ExperimentConfig()
grid = cfg.grid()
psi0 = q.make_gaussian_packet(grid, cfg.packet())
V = cfg.potential()

plan = q.EvolutionPlan(dt=cfg.dt_fs, snapshot_times=(0.0, 90.0, 300.0), mass=cfg.mass_m0)
snapshots = q.evolve(psi0, V, plan)

fig, axes = plt.subplots(3, 1, figsize=(7, 8), sharex=True)
for ax, (t, psi) in zip(axes, snapshots):
    ax.plot(grid.points, psi.density(), lw=1.0, label=f"t = {t:g} fs")
    ax.fill_between(grid.points, 0, V.values * psi0.density().max() / 0.2,
                    color="0.8", label="barriers (scaled)")
    ax.set_ylabel(r"$|\psi|^2$ (1/nm)")
    ax.legend(loc="upper right")
axes[-1].set_xlabel("x (nm)")
axes[-1].set_xlim(0, 300)

T = q.transmission_coefficient(snapshots[-1][1], cfg.barrier_center_nm)
axes[-1].set_title(f"transmitted fraction at t2: {T:.4f}", fontsize=10)
fig.tight_layout()
fig.savefig("demo01_packet_and_barrier.png", dpi=150)
print(f"transmission = {T:.6f}; wrote demo01_packet_and_barrier.png")
