"""Basin hopping on islands: perturb, descend, Metropolis-accept, migrate."""

from __future__ import annotations

import math

import numpy as np

from swarmgrid.gradient.descent import _line_params, _Tracker, steepest_descent
from swarmgrid.metaheuristics.common import IslandOptimizer, empty_island, random_population, sa_accept


def uniform_perturber(x, rng, radius, lo, hi):
    return np.clip(x + radius * rng.uniform(-1.0, 1.0, x.shape), lo, hi)


def armijo_local_search(ctx, x0, max_iter=50):
    """Box-projected Armijo steepest descent from ``x0``; returns ``(x, f)``.

    The objective is evaluated at ``clip(x)`` so every reported point lies in
    the box.
    """
    lo, hi = ctx.lo, ctx.hi

    def fn(x):
        return ctx.evaluator(np.clip(x, lo, hi))

    tracker = _Tracker(on_improve=lambda x, f: ctx.publish(np.clip(x, lo, hi), f))
    steepest_descent(
        fn,
        x0,
        _line_params(ctx.params, "bh"),
        gtol=ctx.params.get_real("bh.gtol", 1e-8),
        max_iter=max_iter,
        h=ctx.params.get_real("grad.h", None),
        tracker=tracker,
    )
    if tracker.x is None:
        return np.array(x0, dtype=np.float64), math.inf
    return np.clip(tracker.x, lo, hi), tracker.f


class BasinHopping(IslandOptimizer):
    """Parameters (prefix ``bh.``): popsize, radius (real or vector; default 5%
    of the box width), T, x0, lsiters, islands, gens, immigrationroute.

    ``perturber(x, rng, radius, lo, hi)`` and ``local_search(ctx, x0)`` can be
    replaced through keyword arguments.
    """

    namespace = "bh"
    default_route = "starvation"

    def __init__(self, params=None, *, perturber=uniform_perturber, local_search=None, **kwargs):
        super().__init__(params, **kwargs)
        self.perturber = perturber
        self.local_search = local_search

    def _descend(self, ctx, x0):
        if self.local_search is not None:
            return self.local_search(ctx, x0)
        return armijo_local_search(ctx, x0, ctx.params.get_int("bh.lsiters", 50))

    def init_island(self, ctx, island_id, rng):
        n = ctx.params.get_int("bh.popsize", 1)
        isl = empty_island(island_id, ctx.dim, rng)
        starts = random_population(ctx, rng, n)
        x0 = ctx.params.get_vec("bh.x0", None)
        if x0 is not None and island_id == 0:
            starts[0] = np.clip(x0, ctx.lo, ctx.hi)
        X, fit = [], []
        for s in starts:
            x, f = self._descend(ctx, s)
            X.append(x)
            fit.append(f)
            if ctx.evaluator.exhausted:
                break
        isl.X, isl.fit = np.array(X).reshape(-1, ctx.dim), np.array(fit)
        isl.birth = np.zeros(len(fit), dtype=np.int64)
        isl.age_limit = np.full(len(fit), 1 << 62, dtype=np.int64)
        return isl

    def step(self, ctx, island):
        p = ctx.params
        radius = p.get_real_or_vec("bh.radius", 0.05 * (ctx.hi - ctx.lo))
        T = p.get_real("bh.T", 1.0)
        rng = island.rng
        for i in range(island.size):
            y = self.perturber(island.X[i], rng, radius, ctx.lo, ctx.hi)
            y, fy = self._descend(ctx, y)
            if sa_accept(fy - island.fit[i], T, rng.random()) and math.isfinite(fy):
                island.X[i], island.fit[i] = y, fy
            if ctx.evaluator.exhausted:
                break
        island.generation += 1
