"""End-to-end experiment runner, axiom validation and the comparison report.

``run_experiment`` evolves the configured packet through the double
barrier, builds all three phase-space distributions at every requested
snapshot time, checks each against the probability axioms and writes a
deterministic set of CSV artifacts plus a JSON report.  Identical config
and seed produce byte-identical outputs.

Config files are plain ``key = value`` text (``#`` comments).  Times may
be given in ps with ``_ps`` keys; they are converted to fs at parse time
and everything downstream runs in the internal unit system.
"""

from __future__ import annotations

import json
import os
import shutil
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Dict, Sequence, Tuple

import numpy as np

from .core import (
    ELECTRON_MASS,
    HBAR,
    MomentumGrid,
    PhaseSpaceField,
    PhaseSpaceKind,
    SpatialGrid,
    WaveFunction,
    marginal_momentum_flux,
    marginal_position,
)
from .solver import (
    EvolutionPlan,
    PacketParams,
    PotentialField,
    evolve,
    make_double_barrier,
    make_gaussian_packet,
    transmission_coefficient,
)
from .wigner import WignerTransformPlan, wigner_marginal_oracle, wigner_transform
from .husimi import CoherentProbe, husimi_direct, husimi_marginal_oracle
from .bohmian import (
    bohmian_distribution,
    bohmian_marginal_oracle,
    integrate_trajectories,
    sample_equilibrium,
    velocity_field,
)

__all__ = [
    "ExperimentConfig",
    "AxiomTolerances",
    "AxiomVerdict",
    "ComparisonReport",
    "run_experiment",
    "emit_plot_data",
    "validate_axioms",
    "parse_config",
    "serialize_config",
    "OUTPUT_ROOT_ENV",
]

OUTPUT_ROOT_ENV = "QPHASE_OUTPUT_ROOT"

FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete description of one run; every field is in internal units."""

    x_min_nm: float = -150.0
    x_max_nm: float = 450.0
    grid_n: int = 4096
    packet_a0_nm: float = 7.5
    packet_x0_nm: float = 100.0
    packet_k0_per_nm: float = 0.69
    mass_m0: float = 0.2
    barrier_center_nm: float = 150.0
    barrier_height_ev: float = 0.2
    barrier_width_nm: float = 0.8
    well_width_nm: float = 3.2
    dt_fs: float = 0.05
    snapshot_times_fs: Tuple[float, ...] = (0.0, 90.0, 300.0)
    probe_s_nm: float = 7.5
    n_traj: int = 100_000
    traj_substep_fs: float = 0.125
    traj_store_every_fs: float = 0.5
    bohm_decimate: int = 8
    export_stride: int = 8
    seed: int = 20240901
    output_dir: str = "runs/default"

    def __post_init__(self):
        object.__setattr__(self, "snapshot_times_fs",
                           tuple(float(t) for t in self.snapshot_times_fs))

    # --- derived builders -------------------------------------------------
    def grid(self) -> SpatialGrid:
        return SpatialGrid(self.x_min_nm, self.x_max_nm, self.grid_n)

    def packet(self) -> PacketParams:
        return PacketParams(self.packet_a0_nm, self.packet_x0_nm, self.packet_k0_per_nm)

    def potential(self) -> PotentialField:
        return make_double_barrier(self.grid(), self.barrier_center_nm,
                                   self.barrier_height_ev, self.barrier_width_nm,
                                   self.well_width_nm)

    def dense_times(self) -> Tuple[float, ...]:
        """Snapshot cadence for trajectory transport; includes all report times."""
        t_end = self.snapshot_times_fs[-1]
        k = int(round(t_end / self.traj_store_every_fs))
        return tuple(np.round(np.arange(k + 1) * self.traj_store_every_fs, 9))

    def plan(self) -> EvolutionPlan:
        return EvolutionPlan(dt=self.dt_fs, snapshot_times=self.dense_times(),
                             mass=self.mass_m0)

    def barrier_band(self) -> Tuple[float, float]:
        half = self.well_width_nm / 2.0 + self.barrier_width_nm
        return (self.barrier_center_nm - half, self.barrier_center_nm + half)

    def validate(self) -> None:
        grid = self.grid()
        self.packet().validate_on(grid)
        self.potential()
        self.plan()
        if self.traj_store_every_fs > 4.0 * self.traj_substep_fs + 1e-12:
            raise ValueError("traj_store_every_fs must not exceed 4 x traj_substep_fs")
        for t in self.snapshot_times_fs:
            q = t / self.traj_store_every_fs
            if abs(q - round(q)) > 1e-9:
                raise ValueError("snapshot times must fall on the trajectory store cadence")
        if self.grid_n % self.bohm_decimate or self.grid_n % self.export_stride:
            raise ValueError("decimation factors must divide grid_n")
        if self.n_traj < 0:
            raise ValueError("n_traj must be nonnegative")


# --- config file io --------------------------------------------------------

_TIME_KEYS_PS = {"dt_ps": "dt_fs", "snapshot_times_ps": "snapshot_times_fs",
                 "traj_substep_ps": "traj_substep_fs",
                 "traj_store_every_ps": "traj_store_every_fs"}
_INT_KEYS = {"grid_n", "n_traj", "seed", "bohm_decimate", "export_stride"}
_STR_KEYS = {"output_dir"}


def coerce_config_entry(key: str, val: str) -> Tuple[str, object]:
    """Turn one textual key/value pair into its canonical field and value."""
    scale = 1.0
    if key in _TIME_KEYS_PS:
        key, scale = _TIME_KEYS_PS[key], 1000.0
    if key not in ExperimentConfig.__dataclass_fields__:
        raise ValueError(f"unknown config key {key!r}")
    if key == "snapshot_times_fs":
        return key, tuple(float(v) * scale for v in val.split(","))
    if key in _INT_KEYS:
        return key, int(val)
    if key in _STR_KEYS:
        return key, val
    return key, float(val) * scale


def parse_config(text: str) -> ExperimentConfig:
    """Parse key = value lines; unknown keys are an error, ps keys convert."""
    values: Dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        try:
            key, value = coerce_config_entry(key.strip(), val.strip())
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        values[key] = value
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; parse(serialize(parse(x))) == parse(x)."""
    lines = []
    for name in ExperimentConfig.__dataclass_fields__:
        v = getattr(cfg, name)
        if name == "snapshot_times_fs":
            lines.append(f"{name} = " + ", ".join(repr(t) for t in v))
        else:
            lines.append(f"{name} = {v!r}" if not isinstance(v, str) else f"{name} = {v}")
    return "\n".join(lines) + "\n"


# --- axiom validation -------------------------------------------------------

@dataclass(frozen=True)
class AxiomTolerances:
    """Pass thresholds for the four probability-axiom checks.

    The charge check is absolute L1 (the density integrates to one, so
    absolute and relative coincide).  The current check is relative L1:
    a sharp barrier scatters a little amplitude past the transform's
    momentum band, which aliases into the p-weighted marginal at the
    1e-4 relative level however fine the grid, while a distribution that
    genuinely smooths the current is wrong at order one.  The threshold
    sits between those regimes.
    """

    positivity_floor: float = -1e-12      # deterministic fields
    positivity_floor_counts: float = 0.0  # histograms: counts cannot go negative
    norm_tol: float = 1e-6
    l1_tol: float = 1e-6                  # deterministic exact-charge check
    j_rel_tol: float = 1e-2               # deterministic exact-current check
    sigma_factor: float = 4.0             # statistical per-bin band
    min_bin_fraction: float = 0.99        # fraction of occupied bins inside the band
    min_counts_for_j: int = 5             # bins below this skip the J band check


@dataclass(frozen=True)
class AxiomVerdict:
    """Outcome of the four checks plus the measured numbers behind them."""

    kind: str
    positive: bool
    normalized: bool
    exact_q: bool
    exact_j: bool
    min_value: float
    total_mass: float
    q_error_l1: float
    j_error_l1: float
    q_bin_fraction: float = 1.0
    j_bin_fraction: float = 1.0

    def flags(self) -> Dict[str, bool]:
        return {"positive": self.positive, "exact_Q": self.exact_q, "exact_J": self.exact_j}


def _aggregate(values: np.ndarray, factor: int) -> np.ndarray:
    return values.reshape(-1, factor).sum(axis=1)


def validate_axioms(F: PhaseSpaceField, psi: WaveFunction, mass: float,
                    tol: AxiomTolerances = AxiomTolerances()) -> AxiomVerdict:
    """Check positivity, normalization and both exact-marginal axioms.

    Deterministic fields (Wigner, Husimi) are held to the L1 tolerance
    against the sharp marginals of psi.  Histogram fields carry
    ``n_samples`` and are checked statistically: per occupied bin the
    deviation must stay within sigma_factor binomial standard deviations
    in at least min_bin_fraction of the occupied bins.
    """
    q = marginal_position(F)
    j = marginal_momentum_flux(F, mass)
    rho, j_exact = wigner_marginal_oracle(psi, mass)
    total = F.total_mass()
    mn = float(F.values.min())
    normalized = abs(total - 1.0) <= tol.norm_tol

    if F.xgrid.n != psi.grid.n:
        if psi.grid.n % F.xgrid.n:
            raise ValueError("field grid is not a decimation of the state grid")
        factor = psi.grid.n // F.xgrid.n
        rho_b = _aggregate(rho, factor) * psi.grid.dx / F.xgrid.dx
        j_b = _aggregate(j_exact, factor) * psi.grid.dx / F.xgrid.dx
    else:
        factor = 1
        rho_b, j_b = rho, j_exact

    q_l1 = float(np.sum(np.abs(q - rho_b)) * F.xgrid.dx)
    j_l1 = float(np.sum(np.abs(j - j_b)) * F.xgrid.dx)

    if F.n_samples is None:
        positive = mn >= tol.positivity_floor
        exact_q = q_l1 <= tol.l1_tol
        j_scale = max(float(np.sum(np.abs(j_b)) * F.xgrid.dx), 1e-12)
        exact_j = j_l1 <= tol.j_rel_tol * j_scale
        q_frac = j_frac = 1.0
    else:
        n = F.n_samples
        positive = mn >= tol.positivity_floor_counts
        counts_q = q * F.xgrid.dx * n
        occupied = counts_q > 0
        prob = rho_b * F.xgrid.dx
        sigma_q = np.sqrt(np.maximum(prob * (1.0 - prob), 0.0) / n)
        dev_q = np.abs(q * F.xgrid.dx - prob)
        q_frac = float(np.mean(dev_q[occupied] <= tol.sigma_factor * sigma_q[occupied])) \
            if occupied.any() else 1.0
        exact_q = q_frac >= tol.min_bin_fraction

        # J estimator variance per bin: E[v^2 1_b] - E[v 1_b]^2 over the
        # equilibrium density, with v the guiding velocity field
        vf = velocity_field(psi, mass)
        v = vf.v
        ev = _aggregate(rho * v, factor) * psi.grid.dx
        ev2 = _aggregate(rho * v * v, factor) * psi.grid.dx
        var = np.maximum(ev2 - ev**2, 0.0)
        sigma_j = np.sqrt(var / n) / F.xgrid.dx
        # momentum binning quantizes each contribution by up to dp/2; in a
        # bin with one shared velocity that error is coherent, so it enters
        # as a deterministic resolution floor, not as sampling noise
        p_floor = 0.5 * F.pgrid.dp * q / (mass * ELECTRON_MASS)
        dev_j = np.abs(j - j_b)
        meaningful = counts_q >= tol.min_counts_for_j
        if meaningful.any():
            allowed = tol.sigma_factor * sigma_j + p_floor
            j_frac = float(np.mean(dev_j[meaningful] <= allowed[meaningful]))
        else:
            j_frac = 1.0
        exact_j = j_frac >= tol.min_bin_fraction

    return AxiomVerdict(
        kind=F.kind,
        positive=bool(positive),
        normalized=bool(normalized),
        exact_q=bool(exact_q),
        exact_j=bool(exact_j),
        min_value=mn,
        total_mass=total,
        q_error_l1=q_l1,
        j_error_l1=j_l1,
        q_bin_fraction=q_frac,
        j_bin_fraction=j_frac,
    )


# --- report -----------------------------------------------------------------

@dataclass
class ComparisonReport:
    """Per-distribution, per-time metrics plus the aggregated axiom table."""

    entries: Dict[str, Dict[str, dict]]
    table: Dict[str, Dict[str, bool]]
    transmission_t2: float
    band_nm: Tuple[float, float]
    config: dict

    def to_json(self) -> str:
        payload = {
            "entries": self.entries,
            "table": self.table,
            "transmission_t2": self.transmission_t2,
            "band_nm": list(self.band_nm),
            "config": self.config,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ComparisonReport":
        d = json.loads(text)
        return cls(entries=d["entries"], table=d["table"],
                   transmission_t2=d["transmission_t2"],
                   band_nm=tuple(d["band_nm"]), config=d["config"])


def _band_metrics(F: PhaseSpaceField, band: Tuple[float, float]) -> Tuple[float, float]:
    x = F.xgrid.points
    sel = (x >= band[0]) & (x < band[1])
    sub = F.values[sel, :]
    peak = float(np.abs(F.values).max())
    band_max = float(np.abs(sub).max() / peak) if sub.size else 0.0
    band_mass = float(abs(sub.sum() * F.xgrid.dx * F.pgrid.dp))
    return band_max, band_mass


def _entry(F: PhaseSpaceField, psi: WaveFunction, cfg: ExperimentConfig,
           verdict: AxiomVerdict) -> dict:
    band_max, band_mass = _band_metrics(F, cfg.barrier_band())
    neg_mass = float(-np.minimum(F.values, 0.0).sum() * F.xgrid.dx * F.pgrid.dp + 0.0)
    return {
        "min_value": verdict.min_value,
        "neg_mass": neg_mass,
        "total_mass": verdict.total_mass,
        "q_error_l1": verdict.q_error_l1,
        "j_error_l1": verdict.j_error_l1,
        "q_bin_fraction": verdict.q_bin_fraction,
        "j_bin_fraction": verdict.j_bin_fraction,
        "band_max_rel": band_max,
        "band_mass": band_mass,
        "flags": verdict.flags(),
    }


# --- artifact writing ---------------------------------------------------------


def _savetxt(path: Path, header: str, columns: Sequence[np.ndarray]) -> None:
    data = np.column_stack(columns)
    np.savetxt(path, data, fmt=FLOAT_FMT, delimiter=",", header=header, comments="")


def _grid_csv(path: Path, F: PhaseSpaceField, stride: int, label: str) -> None:
    x = F.xgrid.points[::stride]
    p = F.pgrid.points[::stride]
    vals = F.values[::stride, ::stride]
    xx, pp = np.meshgrid(x, p, indexing="ij")
    header = (f"x_nm,p_evfs_per_nm,{label}"
              f" # stride={stride} dx={F.xgrid.dx * stride!r} dp={F.pgrid.dp * stride!r}")
    _savetxt(path, header, [xx.ravel(), pp.ravel(), vals.ravel()])


def _resolve_output_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output_dir)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    return out


def run_experiment(cfg: ExperimentConfig, keep_fields: bool = False):
    """Run the full pipeline and write artifacts; returns the report.

    With ``keep_fields`` the returned tuple also carries the in-memory
    snapshots and fields (used by the test suite to avoid recomputation).
    Partial outputs are removed if anything fails mid-run.
    """
    cfg.validate()
    grid = cfg.grid()
    psi0 = make_gaussian_packet(grid, cfg.packet())
    V = cfg.potential()
    wplan = WignerTransformPlan(grid)
    wplan.check_nyquist(cfg.packet())
    probe = CoherentProbe(cfg.probe_s_nm)

    snapshots = evolve(psi0, V, cfg.plan())
    by_time = {t: s for t, s in snapshots}
    report_times = [float(t) for t in cfg.snapshot_times_fs]

    ens = None
    if cfg.n_traj > 0:
        x_init = sample_equilibrium(psi0, cfg.n_traj, cfg.seed)
        ens = integrate_trajectories(
            snapshots, x_init, cfg.mass_m0, cfg.traj_substep_fs,
            output_times=report_times, seed=cfg.seed,
        )
    bgrid_x = grid.decimate(cfg.bohm_decimate)
    bgrid_p = wplan.pgrid.decimate(cfg.bohm_decimate)

    out_dir = _resolve_output_dir(cfg)
    created = not out_dir.exists()
    out_dir.mkdir(parents=True, exist_ok=True)

    entries: Dict[str, Dict[str, dict]] = {"wigner": {}, "husimi": {}, "bohmian": {}}
    fields = {}
    try:
        (out_dir / "config.txt").write_text(serialize_config(cfg))
        _savetxt(out_dir / "potential.csv", "x_nm,V_eV", [grid.points, V.values])

        for k, t in enumerate(report_times):
            label = f"{t:g}"
            psi = by_time[t]
            _savetxt(out_dir / f"psi_t{label}fs.csv", "x_nm,re_psi,im_psi",
                     [grid.points, psi.values.real, psi.values.imag])
            rho, j_exact = wigner_marginal_oracle(psi, cfg.mass_m0)

            W = wigner_transform(psi, wplan)
            vw = validate_axioms(W, psi, cfg.mass_m0)
            entries["wigner"][label] = _entry(W, psi, cfg, vw)
            _grid_csv(out_dir / f"wigner_grid_t{label}fs.csv", W, cfg.export_stride, "W")
            _savetxt(out_dir / f"wigner_marginals_t{label}fs.csv",
                     "x_nm,Q,J,Q_ref,J_ref",
                     [grid.points, marginal_position(W),
                      marginal_momentum_flux(W, cfg.mass_m0), rho, j_exact])

            H = husimi_direct(psi, probe, wplan.pgrid)
            vh = validate_axioms(H, psi, cfg.mass_m0)
            entries["husimi"][label] = _entry(H, psi, cfg, vh)
            _grid_csv(out_dir / f"husimi_grid_t{label}fs.csv", H, cfg.export_stride, "H")
            qh_ref, jh_ref = husimi_marginal_oracle(psi, probe, cfg.mass_m0)
            _savetxt(out_dir / f"husimi_marginals_t{label}fs.csv",
                     "x_nm,Q,J,Q_smoothed_ref,J_smoothed_ref",
                     [grid.points, marginal_position(H),
                      marginal_momentum_flux(H, cfg.mass_m0), qh_ref, jh_ref])

            if ens is not None:
                B = bohmian_distribution(ens, k, bgrid_x, bgrid_p)
                vb = validate_axioms(B, psi, cfg.mass_m0)
                entries["bohmian"][label] = _entry(B, psi, cfg, vb)
                _grid_csv(out_dir / f"bohmian_grid_t{label}fs.csv", B, 1, "F")
                factor = cfg.bohm_decimate
                rho_b = _aggregate(rho, factor) * grid.dx / bgrid_x.dx
                j_b = _aggregate(j_exact, factor) * grid.dx / bgrid_x.dx
                _savetxt(out_dir / f"bohmian_marginals_t{label}fs.csv",
                         "x_nm,Q,J,Q_ref,J_ref",
                         [bgrid_x.points, marginal_position(B),
                          marginal_momentum_flux(B, cfg.mass_m0), rho_b, j_b])
            if keep_fields:
                fields[t] = {"psi": psi, "wigner": W, "husimi": H,
                             "bohmian": B if ens is not None else None}

        table = {}
        for dist, per_time in entries.items():
            if not per_time:
                continue
            table[dist] = {
                flag: bool(all(e["flags"][flag] for e in per_time.values()))
                for flag in ("positive", "exact_Q", "exact_J")
            }
        t2 = report_times[-1]
        T = transmission_coefficient(by_time[t2], cfg.barrier_center_nm)
        report = ComparisonReport(
            entries=entries, table=table, transmission_t2=float(T),
            band_nm=cfg.barrier_band(), config=asdict(cfg),
        )
        (out_dir / "report.json").write_text(report.to_json() + "\n")
    except Exception:
        if created:
            shutil.rmtree(out_dir, ignore_errors=True)
        raise

    if keep_fields:
        return report, dict(snapshots=snapshots, fields=fields, ensemble=ens, out_dir=out_dir)
    return report


# --- plot-data emission -------------------------------------------------------

_PLOT_SCRIPT = """\
#!/usr/bin/env python3
\"\"\"Render the exported phase-space grids and marginals (matplotlib).\"\"\"
import glob
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

here = os.path.dirname(os.path.abspath(__file__))

for path in sorted(glob.glob(os.path.join(here, "*_grid_*.dat"))):
    x, p, f = np.loadtxt(path, unpack=True)
    nx = np.unique(x).size
    np_ = x.size // nx
    X, P, F = (a.reshape(nx, np_) for a in (x, p, f))
    lim = np.abs(F).max()
    fig, ax = plt.subplots(figsize=(6, 4.5))
    m = ax.pcolormesh(X, P, F, cmap="RdBu_r", vmin=-lim, vmax=lim, shading="auto")
    fig.colorbar(m, ax=ax)
    ax.set_xlabel("x (nm)")
    ax.set_ylabel("p (eV fs / nm)")
    ax.set_title(os.path.basename(path))
    fig.savefig(path.replace(".dat", ".png"), dpi=150)
    plt.close(fig)

for path in sorted(glob.glob(os.path.join(here, "*_marginals_*.dat"))):
    cols = np.loadtxt(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(cols[:, 0], cols[:, 1], label="from field")
    if cols.shape[1] > 2:
        ax.plot(cols[:, 0], cols[:, 2], "--", label="reference")
    ax.set_xlabel("x (nm)")
    ax.legend()
    ax.set_title(os.path.basename(path))
    fig.savefig(path.replace(".dat", ".png"), dpi=150)
    plt.close(fig)

print("wrote", len(glob.glob(os.path.join(here, "*.png"))), "figures")
"""


def emit_plot_data(run_dir) -> Path:
    """Convert a run's CSV artifacts into whitespace-separated plot files.

    Writes ``plots/`` inside the run directory: one ``.dat`` per grid
    (x p F columns), per-marginal ``.dat`` files (x value [reference]),
    and a self-contained ``plot_all.py``.  Raises FileNotFoundError
    naming the first missing artifact.
    """
    run_dir = Path(run_dir)
    report_path = run_dir / "report.json"
    if not report_path.exists():
        raise FileNotFoundError(f"missing artifact: {report_path}")
    report = ComparisonReport.from_json(report_path.read_text())
    times = sorted(next(iter(report.entries.values())).keys(), key=float)
    plots = run_dir / "plots"
    plots.mkdir(exist_ok=True)

    for dist in report.entries:
        for label in times:
            src = run_dir / f"{dist}_grid_t{label}fs.csv"
            if not src.exists():
                raise FileNotFoundError(f"missing artifact: {src}")
            data = np.loadtxt(src, delimiter=",", skiprows=1)
            np.savetxt(plots / f"{dist}_grid_t{label}.dat", data, fmt=FLOAT_FMT)
            src = run_dir / f"{dist}_marginals_t{label}fs.csv"
            if not src.exists():
                raise FileNotFoundError(f"missing artifact: {src}")
            cols = np.loadtxt(src, delimiter=",", skiprows=1)
            np.savetxt(plots / f"{dist}_marginals_q_t{label}.dat",
                       cols[:, [0, 1, 3]], fmt=FLOAT_FMT)
            np.savetxt(plots / f"{dist}_marginals_j_t{label}.dat",
                       cols[:, [0, 2, 4]], fmt=FLOAT_FMT)
    script = plots / "plot_all.py"
    script.write_text(_PLOT_SCRIPT)
    script.chmod(0o755)
    return plots
