"""Pairwise comparison matrix at desk scale.

    python scripts/compare_matrix.py --methods ga,mc,fa --reps 10 --csv matrix.csv
"""

import argparse
import time

from swarmgrid.benchfns import SUITE
from swarmgrid.harness.runner import COMPARE_METHODS, DESK_DIM, DESK_REPS, compare


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--methods", default=",".join(COMPARE_METHODS))
    ap.add_argument("--functions", default=",".join(SUITE))
    ap.add_argument("--dim", type=int, default=DESK_DIM)
    ap.add_argument("--reps", type=int, default=DESK_REPS)
    ap.add_argument("--budget", type=int)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--csv")
    args = ap.parse_args()

    done = [0]
    t0 = time.perf_counter()

    def progress(rec):
        done[0] += 1
        if done[0] % 50 == 0:
            print(f"{done[0]} runs, {time.perf_counter() - t0:.0f}s", flush=True)

    cmp = compare(
        args.methods.split(","), args.functions.split(","), args.dim, args.reps, args.budget,
        threads=args.threads, progress=progress,
    )
    for r in cmp.results:
        print(f"{r.name:>6} " + " ".join(f"{v:11.4g}" for v in r.values))
    print()
    print(cmp.table())
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write("\n".join(cmp.matrix_lines()) + "\n")


if __name__ == "__main__":
    main()
