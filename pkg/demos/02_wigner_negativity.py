"""Where the Wigner field goes negative, and why that matters.

At t0 the packet is a pure Gaussian and its phase-space image is
nonnegative.  After the barrier splits it, interference drives the field
negative, and the cell between the barriers shows strong signed values
whose momentum integral nearly cancels: structure without charge.

Run:  python demos/02_wigner_negativity.py
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

import qphase as q

cfg = q.ExperimentConfig()
grid = cfg.grid()
psi0 = q.make_gaussian_packet(grid, cfg.packet())
plan = q.EvolutionPlan(dt=cfg.dt_fs, snapshot_times=(0.0, 300.0), mass=cfg.mass_m0)
snapshots = dict(q.evolve(psi0, cfg.potential(), plan))

wplan = q.WignerTransformPlan(grid)
fig, axes = plt.subplots(1, 2, figsize=(11, 4))
for ax, t in zip(axes, (0.0, 300.0)):
    W = q.wigner_transform(snapshots[t], wplan)
    neg_mass, w_min, (x_at, p_at) = q.negativity_volume(W)
    s = 4  # display decimation only
    lim = np.abs(W.values).max()
    ax.pcolormesh(W.xgrid.points[::s], W.pgrid.points[::s], W.values[::s, ::s].T,
                  cmap="RdBu_r", vmin=-lim, vmax=lim, shading="auto")
    ax.set_xlim(0, 300)
    ax.set_ylim(-0.8, 0.8)
    ax.set_xlabel("x (nm)")
    ax.set_title(f"t = {t:g} fs: negative mass {neg_mass:.3g}\n"
                 f"min {w_min:.3g} at ({x_at:.0f} nm, {p_at:.2f})", fontsize=9)
axes[0].set_ylabel("p (eV fs / nm)")
fig.tight_layout()
fig.savefig("demo02_wigner_negativity.png", dpi=150)

# the mid-structure band: large |W|, nearly zero integrated charge
W2 = q.wigner_transform(snapshots[300.0], wplan)
band = (W2.xgrid.points >= 147.6) & (W2.xgrid.points < 152.4)
sub = W2.values[band, :]
print("band max |W| relative to global:", np.abs(sub).max() / np.abs(W2.values).max())
print("band integrated charge:", sub.sum() * W2.xgrid.dx * W2.pgrid.dp)
print("wrote demo02_wigner_negativity.png")
