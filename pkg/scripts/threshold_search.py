"""Exhaustive search over monotone multi-threshold rules, scored by the renewal evaluator.

Independent of the MDP solvers: enumerates every non-increasing (tau_1, ..., tau_K)
with i < tau_i <= i + d (the top value means "switch for the whole service window")
and ranks them by exact average AoI.

    python3 scripts/threshold_search.py --p 0.07 --d 10 --top 5 --show 9,8,7,6
"""

import argparse

from aoi_sched import Params, ThresholdPolicy, eval_threshold_exact


def monotone_rules(d: int, max_k: int):
    def rec(tau):
        yield tuple(tau)
        i = len(tau) + 1
        if i > max_k:
            return
        hi = min(tau[-1] if tau else i + d, i + d)
        for t in range(i + 1, hi + 1):
            yield from rec(tau + [t])

    yield from rec([])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=float, default=0.07)
    ap.add_argument("--d", type=int, default=10)
    ap.add_argument("--max-k", type=int, default=12)
    ap.add_argument("--top", type=int, default=5)
    ap.add_argument("--show", default="9,8,7,6", help="also report this rule (comma list, empty for myopic)")
    args = ap.parse_args()

    params = Params(args.p, args.d, args.d + 1)
    scored = sorted(
        (eval_threshold_exact(ThresholdPolicy(params, len(t), t)).avg_aoi_slot, t)
        for t in monotone_rules(args.d, args.max_k)
    )
    print(f"{len(scored)} rules searched at p={args.p}, d={args.d}")
    for avg, t in scored[: args.top]:
        print(f"  {avg:.10f}  tau={t}")
    shown = tuple(int(x) for x in args.show.split(",") if x)
    for rank, (avg, t) in enumerate(scored, start=1):
        if t == shown:
            print(f"rule {shown}: {avg:.10f}, rank {rank}")
        if t == ():
            print(f"myopic: {avg:.10f}, rank {rank}")


if __name__ == "__main__":
    main()
