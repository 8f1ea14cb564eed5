"""Barrier-off DE thread sweep (rosenbrock, D=100, pop 400, 1000 generations by default)."""

import argparse
import os

from swarmgrid.harness.config import RunConfig
from swarmgrid.harness.runner import speedup


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--threads", default="1,2,4")
    ap.add_argument("--dim", type=int, default=100)
    ap.add_argument("--pop", type=int, default=400)
    ap.add_argument("--gens", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    params = {"de.pop": args.pop, "de.gens": args.gens, "de.w": 0.5, "de.pc": 0.2}
    cfg = RunConfig("rosenbrock", args.dim, "de", params=params, seed=args.seed, budget=args.pop * (args.gens + 1))
    rows = speedup(cfg, [int(t) for t in args.threads.split(",")])
    print(f"cpus available: {len(os.sched_getaffinity(0))}")
    print("threads  seconds  speedup  efficiency")
    for r in rows:
        print(f"{r.threads:7d}  {r.seconds:7.2f}  {r.speedup:7.2f}  {r.efficiency:10.2f}")


if __name__ == "__main__":
    main()
