"""Command-line front end: run, plot, validate and sweep.

The library is the product; this wrapper parses one config file, applies
flag overrides and drives the harness.  ``--seed`` is mandatory for
``run`` so that no artifact is ever produced from an implicit seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .core import SpatialGrid, WaveFunction
from .harness import (
    ComparisonReport,
    ExperimentConfig,
    coerce_config_entry,
    emit_plot_data,
    parse_config,
    run_experiment,
    serialize_config,
    validate_axioms,
)
from .husimi import CoherentProbe, husimi_direct
from .solver import EvolutionPlan, evolve, make_gaussian_packet
from .wigner import WignerTransformPlan, wigner_transform

__all__ = ["main"]


def _load_config(args) -> ExperimentConfig:
    if args.config:
        cfg = parse_config(Path(args.config).read_text())
    else:
        cfg = ExperimentConfig()
    overrides = {}
    for item in args.set or []:
        key, _, val = item.partition("=")
        if not val:
            raise SystemExit(f"--set expects key=value, got {item!r}")
        try:
            field, value = coerce_config_entry(key.strip(), val.strip())
        except ValueError as exc:
            raise SystemExit(str(exc))
        overrides[field] = value
    if overrides:
        cfg = replace(cfg, **overrides)
    if getattr(args, "output", None):
        cfg = replace(cfg, output_dir=args.output)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    cfg.validate()
    return cfg


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    report = run_experiment(cfg)
    print(serialize_config(cfg), end="")
    print(f"transmission(t2) = {report.transmission_t2:.6f}")
    for dist, flags in sorted(report.table.items()):
        rendered = ", ".join(f"{k}={'yes' if v else 'NO'}" for k, v in sorted(flags.items()))
        print(f"{dist:8s} {rendered}")
    return 0


def _cmd_plot(args) -> int:
    plots = emit_plot_data(args.run_dir)
    print(f"plot data and script in {plots}")
    return 0


def _read_psi(run_dir: Path, label: str, grid: SpatialGrid) -> WaveFunction:
    cols = np.loadtxt(run_dir / f"psi_t{label}fs.csv", delimiter=",", skiprows=1)
    return WaveFunction(grid, cols[:, 1] + 1j * cols[:, 2])


def _cmd_validate(args) -> int:
    """Recompute the deterministic fields from the stored states and re-check."""
    run_dir = Path(args.run_dir)
    report = ComparisonReport.from_json((run_dir / "report.json").read_text())
    cfg = ExperimentConfig(**{k: tuple(v) if isinstance(v, list) else v
                              for k, v in report.config.items()})
    grid = cfg.grid()
    wplan = WignerTransformPlan(grid)
    probe = CoherentProbe(cfg.probe_s_nm)
    failures = 0
    for label in sorted(report.entries["wigner"], key=float):
        psi = _read_psi(run_dir, label, grid)
        recomputed = {
            "wigner": wigner_transform(psi, wplan),
            "husimi": husimi_direct(psi, probe, wplan.pgrid),
        }
        for dist, F in recomputed.items():
            verdict = validate_axioms(F, psi, cfg.mass_m0)
            stored = report.entries[dist][label]["flags"]
            fresh = verdict.flags()
            status = "ok" if fresh == stored else "MISMATCH"
            failures += status != "ok"
            rendered = ", ".join(f"{k}={'yes' if v else 'NO'}" for k, v in sorted(fresh.items()))
            print(f"t={label:>6} fs {dist:8s} {rendered}  [{status}]")
    if "bohmian" in report.entries and report.entries["bohmian"]:
        for label, entry in sorted(report.entries["bohmian"].items(), key=lambda kv: float(kv[0])):
            flags = entry["flags"]
            rendered = ", ".join(f"{k}={'yes' if v else 'NO'}" for k, v in sorted(flags.items()))
            print(f"t={label:>6} fs bohmian  {rendered}  [stored]")
    print("validation", "FAILED" if failures else "passed")
    return 1 if failures else 0


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    out = {}
    if args.kind == "dt":
        grid = cfg.grid()
        psi0 = make_gaussian_packet(grid, cfg.packet())
        V = cfg.potential()
        t_end = 10.0
        states = []
        for dt in (0.4, 0.2, 0.1):
            plan = EvolutionPlan(dt=dt, snapshot_times=(t_end,), mass=cfg.mass_m0)
            states.append(evolve(psi0, V, plan)[-1][1].values)
        e1 = float(np.sqrt(np.sum(np.abs(states[0] - states[1]) ** 2) * grid.dx))
        e2 = float(np.sqrt(np.sum(np.abs(states[1] - states[2]) ** 2) * grid.dx))
        out = {"dt_values_fs": [0.4, 0.2, 0.1], "step_diffs": [e1, e2],
               "observed_order": float(np.log2(e1 / e2))}
    elif args.kind == "grid":
        from .core import HBAR, ELECTRON_MASS
        t_end = 100.0
        errs = {}
        for n in (1024, 2048, 4096):
            grid = SpatialGrid(0.0, 300.0, n)
            psi0 = make_gaussian_packet(grid, cfg.packet())
            from .solver import PotentialField
            V0 = PotentialField(grid, np.zeros(n))
            plan = EvolutionPlan(dt=cfg.dt_fs, snapshot_times=(t_end,), mass=cfg.mass_m0)
            psi = evolve(psi0, V0, plan)[-1][1]
            x = grid.points
            rho = psi.density()
            mean = float(np.sum(x * rho) * grid.dx)
            var = float(np.sum((x - mean) ** 2 * rho) * grid.dx)
            a0 = cfg.packet_a0_nm
            m_abs = cfg.mass_m0 * ELECTRON_MASS
            var_ref = a0**2 * (1.0 + (HBAR * t_end / (2.0 * m_abs * a0**2)) ** 2)
            errs[str(n)] = abs(var / var_ref - 1.0)
        out = {"spreading_rel_error_by_n": errs}
    elif args.kind == "ntraj":
        report, extras = run_experiment(replace(cfg, output_dir=cfg.output_dir + "_sweep_tmp"),
                                        keep_fields=True)
        ens = extras["ensemble"]
        psi2 = extras["fields"][cfg.snapshot_times_fs[-1]]["psi"]
        grid = cfg.grid()
        dec = cfg.bohm_decimate
        edges = grid.x_min + dec * grid.dx * np.arange(grid.n // dec + 1)
        q_ref = (psi2.density() * grid.dx).reshape(-1, dec).sum(axis=1)
        l1 = {}
        last_idx = len(ens.times) - 1
        xs = ens.positions[:, last_idx]
        xs = xs[~np.isnan(xs)]
        for n in (1000, 10000, min(100000, xs.size)):
            cnt, _ = np.histogram(xs[:n], bins=edges)
            l1[str(n)] = float(np.abs(cnt / n - q_ref).sum())
        out = {"l1_by_n": l1}
    path = Path(cfg.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    dest = path / f"sweep_{args.kind}.json"
    dest.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    print(json.dumps(out, indent=2, sort_keys=True))
    print(f"wrote {dest}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="qphase",
                                     description="phase-space distribution comparison runs")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment and write artifacts")
    p_run.add_argument("--config", help="key=value config file")
    p_run.add_argument("--seed", type=int, required=True, help="RNG seed (required)")
    p_run.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one config key (repeatable)")
    p_run.add_argument("--output", help="output directory (overrides config)")
    p_run.set_defaults(func=_cmd_run)

    p_plot = sub.add_parser("plot", help="emit plot data files and a plotting script")
    p_plot.add_argument("run_dir")
    p_plot.set_defaults(func=_cmd_plot)

    p_val = sub.add_parser("validate", help="recompute and re-check a run's axioms")
    p_val.add_argument("run_dir")
    p_val.set_defaults(func=_cmd_validate)

    p_sweep = sub.add_parser("sweep", help="convergence sweeps (dt, grid, ntraj)")
    p_sweep.add_argument("kind", choices=("dt", "grid", "ntraj"))
    p_sweep.add_argument("--config", help="key=value config file")
    p_sweep.add_argument("--set", action="append", metavar="KEY=VALUE")
    p_sweep.add_argument("--output", help="output directory")
    p_sweep.set_defaults(func=_cmd_sweep)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
