"""Optimal action maps in state and epoch coordinates, printed as text grids.

Writes the same CSVs as ``aoi-sched policymap`` and draws the epoch map
(rows i, columns j; S = switch, . = skip).

    python3 scripts/policy_map.py --p 0.07 --d 10 --delta-m 200 --out results/policymap
"""

import argparse
import csv
from pathlib import Path

from aoi_sched.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=float, default=0.07)
    ap.add_argument("--d", type=int, default=10)
    ap.add_argument("--delta-m", type=int, default=200)
    ap.add_argument("--rows", type=int, default=12, help="epoch rows i to draw")
    ap.add_argument("--out", default="results/policymap")
    args = ap.parse_args()

    argv = ["policymap", "--p", str(args.p), "--d", str(args.d), "--delta-m", str(args.delta_m), "--out", args.out]
    if cli_main(argv) != 0:
        raise SystemExit("solve failed")
    with open(Path(args.out) / "epoch_map.csv") as f:
        cells = {(int(r["i"]), int(r["j"])): r["action"] for r in csv.DictReader(f)}
    width = args.rows + args.d
    print("i\\j " + "".join(f"{j % 10}" for j in range(1, width + 1)))
    for i in range(1, args.rows + 1):
        line = "".join(
            {"SWITCH": "S", "SKIP": "."}.get(cells.get((i, j)), " ") for j in range(1, width + 1)
        )
        print(f"{i:>3} {line}")


if __name__ == "__main__":
    main()
