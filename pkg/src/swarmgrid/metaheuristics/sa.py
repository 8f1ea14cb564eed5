"""Multi-start simulated annealing: one independent chain per thread."""

from __future__ import annotations

import numpy as np

from swarmgrid.core import Optimizer, RunContext, rng_stream
from swarmgrid.errors import BudgetExhausted, NonFiniteResult
from swarmgrid.exec_local import BatchExecutor, FailedResult
from swarmgrid.metaheuristics.common import CoolingSchedule, sa_accept


def anneal(fn, x0, schedule: CoolingSchedule, step, lo, hi, rng, iters, on_improve=None):
    """Run one chain for ``iters`` moves (or until ``fn`` raises BudgetExhausted).

    A move perturbs one random coordinate by ``N(0, step_j^2)`` and is clamped
    to the box.  Returns the best ``(x, f)`` seen.
    """
    x = np.clip(np.asarray(x0, dtype=np.float64), lo, hi)
    fx = fn(x)
    best_x, best_f = x.copy(), fx
    if on_improve:
        on_improve(best_x, best_f)
    d = x.size
    step = np.broadcast_to(step, (d,))
    try:
        for k in range(iters):
            j = rng.integers(d)
            y = x.copy()
            y[j] = min(max(y[j] + rng.normal() * step[j], lo[j]), hi[j])
            try:
                fy = fn(y)
            except NonFiniteResult:
                continue
            if sa_accept(fy - fx, schedule.temperature(k), rng.random()):
                x, fx = y, fy
                if fx < best_f:
                    best_x, best_f = x.copy(), fx
                    if on_improve:
                        on_improve(best_x, best_f)
    except BudgetExhausted:
        pass
    return best_x, best_f


class SimulatedAnnealing(Optimizer):
    """Parameters (prefix ``sa.``): schedule, t0, K (horizon), alpha (rate),
    step (relative to box width), numthreads (chains), iters."""

    namespace = "sa"

    def _run(self, ctx: RunContext) -> None:
        p = ctx.params
        chains = p.get_int("sa.numthreads", 1)
        per_chain = max(1, ctx.budget.remaining // chains)
        schedule = CoolingSchedule(
            p.get_str("sa.schedule", "linear"),
            p.get_real("sa.t0", 1000.0),
            p.get_int("sa.K", per_chain),
            p.get_real("sa.alpha", 0.95),
        )
        iters = p.get_int("sa.iters", 1 << 62)
        step = p.get_real("sa.step", 0.1) * (ctx.hi - ctx.lo)

        def chain(c):
            rng = rng_stream(ctx.seed, c)
            x0 = rng.uniform(ctx.lo, ctx.hi)
            return anneal(ctx.evaluator, x0, schedule, step, ctx.lo, ctx.hi, rng, iters, ctx.publish)

        if chains == 1:
            chain(0)
            return
        with BatchExecutor(chains, name="sa") as ex:
            results = ex.execute_batch([lambda c=c: chain(c) for c in range(chains)])
        for r in results:
            if isinstance(r, FailedResult):
                raise RuntimeError(f"annealing chain failed: {r.error}: {r.detail}")
