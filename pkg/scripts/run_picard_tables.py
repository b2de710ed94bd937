#!/usr/bin/env python3
"""Iteration traces of the cos-driver / path-maximum problem.

Runs the d=1 benchmark (driver cos(y), terminal = max of the Brownian grid
values) at chaos orders 2 and 3 with the same panel seed and prints the
per-iteration values of Y0 and Z0 plus wall-clock time, one row per order.
"""

import argparse
import time

import chaosbsde as cb


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--M", type=int, default=100_000)
    ap.add_argument("--N", type=int, default=20)
    ap.add_argument("--iterations", type=int, default=6)
    ap.add_argument("--seed", type=int, default=20260810)
    args = ap.parse_args()

    setup = cb.get_problem("cos_sup")
    results = {}
    for p in (2, 3):
        config = cb.SolverConfig(
            p=p, N=args.N, M=args.M, K_it=args.iterations, seed=args.seed
        )
        t0 = time.perf_counter()
        state = cb.solve(setup.problem, config)
        results[p] = (state, time.perf_counter() - t0)

    header = "q".rjust(4) + "".join(f"{q:>12d}" for q in range(1, args.iterations + 1))
    for label, pick in (("Y0", lambda s: s.y0_trace), ("Z0", lambda s: s.z0_trace)):
        print(f"\n{label} per Picard iteration (M={args.M}, N={args.N}, seed={args.seed})")
        print(header + "  wall[s]")
        for p, (state, wall) in results.items():
            values = [v if label == "Y0" else float(v[0]) for v in pick(state)]
            row = f"p={p}".rjust(4) + "".join(f"{v:12.6f}" for v in values)
            print(row + f"  {wall:7.2f}")


if __name__ == "__main__":
    main()
