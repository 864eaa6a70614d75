"""How the extracted thresholds and average cost depend on the AoI truncation delta_m.

For each delta_m: solver thresholds, the MDP average cost, and the renewal
evaluation of the extracted rule (which has no truncation at all).

    python3 scripts/truncation_study.py --p 0.07 --d 10 --delta-m 40,50,100,200,400
"""

import argparse
import time

from aoi_sched import Params, eval_threshold_exact, extract_thresholds, solve_structured, tail_delta_m


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=float, default=0.07)
    ap.add_argument("--d", type=int, default=10)
    ap.add_argument("--delta-m", default="40,50,60,100,200,400")
    args = ap.parse_args()

    print(f"tail-based truncation for p={args.p}, d={args.d}: {tail_delta_m(args.p, args.d)}")
    print(f"{'delta_m':>7} {'K':>3} {'tau':<28} {'mdp avg':>14} {'renewal avg':>14} {'secs':>6}")
    for dm in (int(x) for x in args.delta_m.split(",")):
        t0 = time.perf_counter()
        pol = solve_structured(Params(args.p, args.d, dm))
        tp = extract_thresholds(pol)
        exact = eval_threshold_exact(tp).avg_aoi_slot
        tau = ",".join(map(str, tp.tau))
        print(f"{dm:>7} {tp.K:>3} {tau:<28} {pol.avg_cost:>14.9f} {exact:>14.9f} {time.perf_counter() - t0:>6.2f}")


if __name__ == "__main__":
    main()
