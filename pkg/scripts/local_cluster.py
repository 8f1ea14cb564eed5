"""Start a server and N worker processes on localhost, then run a GA through them.

The distributed result is compared with a local run of the same seed.
"""

import argparse
import subprocess
import sys
import time

import numpy as np

from swarmgrid.benchfns import make_function
from swarmgrid.exec_dist import Client, Server
from swarmgrid.metaheuristics import GeneticAlgorithm


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workers", type=int, default=3)
    ap.add_argument("--threads", type=int, default=2)
    ap.add_argument("--dim", type=int, default=10)
    ap.add_argument("--budget", type=int, default=5000)
    args = ap.parse_args()

    with Server("127.0.0.1", 0, 0, timeout=30) as srv:
        procs = [
            subprocess.Popen([sys.executable, "-m", "swarmgrid", "worker", "--server",
                              f"127.0.0.1:{srv.worker_port}", "--threads", str(args.threads), "--tag", f"w{i}"])
            for i in range(args.workers)
        ]
        try:
            while len(srv.ready_workers()) < args.workers:
                time.sleep(0.05)
            f = make_function("rastrigin", args.dim)
            params = {"seed": 1, "budget": args.budget}
            t0 = time.perf_counter()
            with Client("127.0.0.1", srv.client_port) as clt:
                remote = GeneticAlgorithm(params, client=clt).minimize(f)
            t_remote = time.perf_counter() - t0
            local = GeneticAlgorithm(params).minimize(f)
            print(f"distributed: {remote.value!r} ({remote.evals_used} evals, {t_remote:.2f}s)")
            print(f"local:       {local.value!r}")
            print("identical:", bool(np.array_equal(remote.arg, local.arg)))
            print("chunks per worker:", {wid: sum(1 for w, _ in srv.dispatch_log if w == wid) for wid, _ in srv.dispatch_log})
        finally:
            for p in procs:
                p.kill()
                p.wait()


if __name__ == "__main__":
    main()
