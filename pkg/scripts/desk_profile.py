"""Distribution of the DE desk profile on shifted Rosenbrock (optimum 390)."""

import argparse

import numpy as np

from swarmgrid.benchfns import make_function
from swarmgrid.harness.runner import build_optimizer


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dim", type=int, default=100)
    ap.add_argument("--budget", type=int, default=100_000)
    ap.add_argument("--runs", type=int, default=10)
    ap.add_argument("--method", default="de_desk")
    args = ap.parse_args()

    f = make_function("rosenbrock_shifted", args.dim, seed=0)
    values = []
    for seed in range(args.runs):
        res = build_optimizer(args.method, {"seed": seed, "budget": args.budget}).minimize(f)
        values.append(res.value)
        print(f"seed {seed:2d}  value {res.value:.6g}  evals {res.evals_used}")
    v = np.array(values)
    print(f"min {v.min():.6g}  median {np.median(v):.6g}  max {v.max():.6g}")
    print(f"within 390 + 1e4: {int(np.sum(v <= 390 + 1e4))}/{len(v)}")


if __name__ == "__main__":
    main()
