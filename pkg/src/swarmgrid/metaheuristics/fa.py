"""Firefly algorithm."""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from swarmgrid.metaheuristics.common import Island, IslandOptimizer, empty_island, random_population


@njit(nogil=True, cache=True)
def fa_move(X, fit, beta0, gamma, step, U, lo, hi):
    """Move fireflies in place.

    Firefly ``i`` is pulled toward every ``j`` that was brighter at the start
    of the generation (using ``j``'s current position), then takes one random
    step ``step * (U[i] - 0.5)`` and is clamped to the box.
    """
    n, d = X.shape
    for i in range(n):
        for j in range(n):
            if fit[j] < fit[i]:
                r2 = 0.0
                for k in range(d):
                    t = X[i, k] - X[j, k]
                    r2 += t * t
                b = beta0 * math.exp(-gamma * r2)
                if b != 0.0:
                    for k in range(d):
                        X[i, k] += b * (X[j, k] - X[i, k])
        for k in range(d):
            v = X[i, k] + step * (U[i, k] - 0.5)
            X[i, k] = min(max(v, lo[k]), hi[k])


def fa_generation(island: Island, evaluate, beta0, gamma, alpha, L, lo, hi) -> None:
    """Move, re-evaluate; ``alpha`` decay is the caller's job."""
    X = np.ascontiguousarray(island.X, dtype=np.float64).copy()
    U = island.rng.random(X.shape)
    fa_move(X, island.fit.astype(np.float64), float(beta0), float(gamma), float(alpha * L), U,
            np.ascontiguousarray(lo, dtype=np.float64), np.ascontiguousarray(hi, dtype=np.float64))
    island.X = X
    island.fit = evaluate(X)
    island.generation += 1


class Firefly(IslandOptimizer):
    """Parameters (prefix ``fa.``): popsize, beta, gamma, alpha, delta, L, islands, gens.

    ``L`` defaults to ``1/sqrt(gamma)``; ``alpha`` is multiplied by ``delta``
    after every generation.
    """

    namespace = "fa"
    default_route = "ring"

    def init_island(self, ctx, island_id, rng):
        n = ctx.params.get_int("fa.popsize", 50)
        isl = empty_island(island_id, ctx.dim, rng)
        isl.X = random_population(ctx, rng, n)
        isl.fit = ctx.evaluator.many(isl.X)
        isl.birth = np.zeros(n, dtype=np.int64)
        isl.age_limit = np.full(n, 1 << 62, dtype=np.int64)
        isl.extra = {}
        isl.alpha = ctx.params.get_real("fa.alpha", 1.0)
        return isl

    def step(self, ctx, island):
        if island.size == 0:
            return
        p = ctx.params
        gamma = p.get_real("fa.gamma", 200.0)
        L = p.get_real("fa.L", 1.0 / math.sqrt(gamma) if gamma > 0 else 1.0)
        alpha = getattr(island, "alpha", p.get_real("fa.alpha", 1.0))
        fa_generation(island, ctx.evaluator.many, p.get_real("fa.beta", 1.0), gamma, alpha, L, ctx.lo, ctx.hi)
        island.alpha = alpha * p.get_real("fa.delta", 0.97)
