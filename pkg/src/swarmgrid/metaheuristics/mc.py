"""Pure random search."""

from __future__ import annotations

from swarmgrid.core import Optimizer, RunContext, rng_stream
from swarmgrid.exec_local import Accumulator, BatchExecutor, FailedResult

BLOCK = 1024


class MonteCarlo(Optimizer):
    """Uniform sampling of the box (``mc.box.lo/hi`` or the function's box).

    The budget is cut into fixed-size blocks; block ``k`` always draws from
    ``rng_stream(seed, k)`` whichever thread runs it, so the sample multiset
    and the reported best do not depend on ``mc.numthreads``.  Ties on value
    go to the lower sample index.
    """

    namespace = "mc"

    def _run(self, ctx: RunContext) -> None:
        n_threads = ctx.params.get_int("mc.numthreads", 1)
        block = ctx.params.get_int("mc.block", BLOCK)
        total = ctx.budget.remaining
        n_blocks = -(-total // block)
        acc = Accumulator.argmin()

        def run_block(k):
            n = min(block, total - k * block)
            X = rng_stream(ctx.seed, k).uniform(ctx.lo, ctx.hi, size=(n, ctx.dim))
            fit = ctx.evaluator.many(X)
            i = int(fit.argmin())
            acc.add((float(fit[i]), k * block + i, X[i]))

        def worker(t):
            for k in range(t, n_blocks, n_threads):
                run_block(k)

        if n_threads == 1:
            worker(0)
        else:
            with BatchExecutor(n_threads, name="mc") as ex:
                res = ex.execute_batch([lambda t=t: worker(t) for t in range(n_threads)])
            for r in res:
                if isinstance(r, FailedResult):
                    raise RuntimeError(f"sampling thread failed: {r.error}: {r.detail}")
        best = acc.value
        if best is not None:
            ctx.publish(best[2], best[0])
