"""Particle swarm with one swarm per island and ring migration."""

from __future__ import annotations

import numpy as np

from swarmgrid.metaheuristics.common import Island, IslandOptimizer, empty_island, random_population


def pso_generation(island: Island, evaluate, w: float, fp: float, fg: float, lo, hi) -> None:
    """One synchronous velocity/position update of every particle.

    ``island.X``/``island.fit`` hold personal bests (what migrates and what
    the island reports); current positions and velocities live in
    ``island.extra["pos"]`` and ``island.extra["V"]``.
    """
    rng = island.rng
    pos, V = island.extra["pos"], island.extra["V"]
    n, d = pos.shape
    gbest = island.X[island.best_index()]
    r1 = rng.random((n, d))
    r2 = rng.random((n, d))
    V = w * V + fp * r1 * (island.X - pos) + fg * r2 * (gbest - pos)
    pos = np.clip(pos + V, lo, hi)
    fit = evaluate(pos)
    better = fit <= island.fit
    island.X = np.where(better[:, None], pos, island.X)
    island.fit = np.where(better, fit, island.fit)
    island.extra["pos"], island.extra["V"] = pos, V
    island.generation += 1


class ParticleSwarm(IslandOptimizer):
    """Parameters (prefix ``ps.``): w, fp, fg, popsize, islands, gens, immigrationroute."""

    namespace = "ps"
    default_route = "ring"

    def init_island(self, ctx, island_id, rng):
        n = ctx.params.get_int("ps.popsize", 10)
        isl = empty_island(island_id, ctx.dim, rng)
        x0 = random_population(ctx, rng, n)
        v0 = 0.5 * (random_population(ctx, rng, n) - x0)
        fit = ctx.evaluator.many(x0)
        isl.X, isl.fit = x0.copy(), fit
        isl.birth = np.zeros(n, dtype=np.int64)
        isl.age_limit = np.full(n, 1 << 62, dtype=np.int64)
        isl.extra = {"pos": x0, "V": v0}
        return isl

    def step(self, ctx, island):
        if island.size == 0:
            return
        p = ctx.params
        pso_generation(
            island,
            ctx.evaluator.many,
            p.get_real("ps.w", 0.6),
            p.get_real("ps.fp", 1.0),
            p.get_real("ps.fg", 1.0),
            ctx.lo,
            ctx.hi,
        )
