"""Score all three distributions against the probability axioms.

Runs the full experiment (this is what the CLI's `run` does), then prints
the per-time metrics and the aggregated verdict table: positivity, exact
charge, exact current.  One construction passes everything.

Run:  python demos/05_axiom_scoreboard.py
"""

import qphase as q

cfg = q.ExperimentConfig(output_dir="runs/demo_scoreboard", n_traj=50_000)
report = q.run_experiment(cfg)

print(f"\ntransmitted fraction at t2: {report.transmission_t2:.4f}")
print(f"barrier band: [{report.band_nm[0]:g}, {report.band_nm[1]:g}] nm\n")

header = f"{'':10s}{'min value':>12s}{'neg mass':>12s}{'|dQ|_1':>10s}{'|dJ|_1':>10s}"
for dist, per_time in report.entries.items():
    print(dist)
    print(header)
    for label in sorted(per_time, key=float):
        e = per_time[label]
        print(f"  t={label:>4s} {e['min_value']:12.2e}{e['neg_mass']:12.3e}"
              f"{e['q_error_l1']:10.1e}{e['j_error_l1']:10.1e}")
    print()

print("verdicts (aggregated over the three times):")
print(f"{'':10s}{'positive':>10s}{'exact Q':>10s}{'exact J':>10s}")
for dist, flags in report.table.items():
    row = "".join(f"{'yes' if flags[k] else 'NO':>10s}"
                  for k in ("positive", "exact_Q", "exact_J"))
    print(f"{dist:10s}{row}")
