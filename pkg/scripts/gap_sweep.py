"""Optimal-vs-myopic AoI gap over the arrival probability.

Exact evaluators by default; ``--method sim`` runs Monte Carlo with common
random numbers instead. Writes a CSV and prints a text bar chart.

    python3 scripts/gap_sweep.py --d 10 --out results/gap_d10.csv
    python3 scripts/gap_sweep.py --d 10 --p-grid 0.001,0.002,0.005,0.01,0.03 --out results/gap_small_p.csv
"""

import argparse
import csv

from aoi_sched.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=int, default=10)
    ap.add_argument("--p-grid", default="0.01:0.99:0.02")
    ap.add_argument("--method", choices=("exact", "sim"), default="exact")
    ap.add_argument("--T", type=int, default=1_000_000)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="results/gap.csv")
    args = ap.parse_args()

    argv = ["sweep", "--p-grid", args.p_grid, "--d", str(args.d), "--method", args.method,
            "--T", str(args.T), "--jobs", str(args.jobs), "--out", args.out]
    if cli_main(argv) != 0:
        raise SystemExit("sweep failed")
    with open(args.out) as f:
        rows = [r for r in csv.DictReader(f) if r["policy"].startswith("optimal")]
    peak = max(float(r["gap_vs_myopic"]) for r in rows) or 1.0
    print(f"\n{'p':>7} {'gap':>10} {'myopic-rel':>10}")
    for r in rows:
        gap = float(r["gap_vs_myopic"])
        rel = gap / (float(r["avg_aoi"]) + gap)
        print(f"{float(r['p']):>7.3f} {gap:>10.5f} {rel:>10.2e} " + "#" * round(40 * max(gap, 0) / peak))


if __name__ == "__main__":
    main()
