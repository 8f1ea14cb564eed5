"""(mu + lambda) evolutionary algorithm with Gaussian mutation."""

from __future__ import annotations

import numpy as np

from swarmgrid.metaheuristics.common import Island, IslandOptimizer, empty_island, random_population


def ea_generation(island: Island, evaluate, mu: int, lam: int, sigma, lo, hi) -> None:
    rng = island.rng
    parents = rng.integers(0, island.size, size=lam)
    kids = island.X[parents] + rng.normal(0.0, 1.0, (lam, island.X.shape[1])) * sigma
    kids = np.clip(kids, lo, hi)
    # a child equal to its parent adds nothing; skip it (and its evaluation)
    kids = kids[np.any(kids != island.X[parents], axis=1)]
    kfit = evaluate(kids) if len(kids) else np.empty(0)
    X = np.vstack([island.X, kids])
    fit = np.concatenate([island.fit, kfit])
    birth = np.concatenate([island.birth, np.full(len(kids), island.generation + 1, dtype=np.int64)])
    order = np.argsort(fit, kind="stable")[:mu]
    island.X, island.fit, island.birth = X[order], fit[order], birth[order]
    island.age_limit = np.full(len(order), 1 << 62, dtype=np.int64)
    island.generation += 1


class Evolutionary(IslandOptimizer):
    """Parameters (prefix ``ea.``): mu, lambda, sigma (absolute std), islands, gens."""

    namespace = "ea"
    default_route = "starvation"

    def init_island(self, ctx, island_id, rng):
        mu = ctx.params.get_int("ea.mu", 10)
        isl = empty_island(island_id, ctx.dim, rng)
        isl.X = random_population(ctx, rng, mu)
        isl.fit = ctx.evaluator.many(isl.X)
        isl.birth = np.zeros(mu, dtype=np.int64)
        isl.age_limit = np.full(mu, 1 << 62, dtype=np.int64)
        return isl

    def step(self, ctx, island):
        if island.size == 0:
            return
        p = ctx.params
        mu = p.get_int("ea.mu", 10)
        sigma = p.get_real_or_vec("ea.sigma", 0.05 * (ctx.hi - ctx.lo))
        ea_generation(island, ctx.evaluator.many, mu, p.get_int("ea.lambda", 2 * mu), sigma, ctx.lo, ctx.hi)
