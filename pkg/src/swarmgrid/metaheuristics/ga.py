"""Island-model genetic algorithm with starvation migration and aging."""

from __future__ import annotations

import numpy as np

from swarmgrid.core import RunContext
from swarmgrid.errors import DegeneratePopulation
from swarmgrid.metaheuristics.common import (
    Island,
    IslandOptimizer,
    draw_age_limits,
    empty_island,
    random_population,
    roulette_select,
    roulette_weights,
)


def one_point_crossover(p1: np.ndarray, p2: np.ndarray, rng) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise one-point crossover of two parent matrices."""
    m, d = p1.shape
    c1, c2 = p1.copy(), p2.copy()
    if d < 2:
        return c1, c2
    cuts = rng.integers(1, d, size=m)
    tail = np.arange(d)[None, :] >= cuts[:, None]
    c1[tail] = p2[tail]
    c2[tail] = p1[tail]
    return c1, c2


class GaussianAlleleMutation:
    """Each allele mutates with probability ``prob`` by ``N(0, (scale * width)^2)``."""

    def __init__(self, prob: float, scale: float):
        self.prob = prob
        self.scale = scale

    def __call__(self, X, rng, lo, hi):
        mask = rng.random(X.shape) < self.prob
        noise = rng.normal(0.0, 1.0, X.shape) * (self.scale * (hi - lo))
        return np.clip(np.where(mask, X + noise, X), lo, hi)


def ga_generation(
    island: Island,
    evaluate,
    xover_prob: float,
    mutator,
    lo,
    hi,
    popsize: int,
    age_mean: float = 1e9,
    age_var: float = 0.0,
    xover=one_point_crossover,
) -> None:
    """Replace ``island`` by its next generation.

    The elite survives; the remaining ``popsize - 1`` members are
    roulette-selected, crossed over and mutated children.  Members older than
    their age limit are then removed.  Children left unevaluated by an
    exhausted budget carry ``inf`` and get zero roulette weight.
    """
    rng = island.rng
    n_children = popsize - 1
    elite = island.best_index()
    if n_children > 0:
        w = roulette_weights(island.fit)
        n_pairs = (n_children + 1) // 2
        parents = roulette_select(w, rng, 2 * n_pairs)
        p1, p2 = island.X[parents[0::2]], island.X[parents[1::2]]
        do_x = rng.random(n_pairs) < xover_prob
        c1, c2 = xover(p1, p2, rng)
        c1 = np.where(do_x[:, None], c1, p1)
        c2 = np.where(do_x[:, None], c2, p2)
        children = np.empty((2 * n_pairs, island.X.shape[1]))
        children[0::2], children[1::2] = c1, c2
        children = mutator(children[:n_children], rng, lo, hi)
        fit = evaluate(children)
    else:
        children, fit = np.empty((0, island.X.shape[1])), np.empty(0)
    island.generation += 1
    g = island.generation
    island.X = np.vstack([island.X[elite : elite + 1], children])
    island.fit = np.concatenate([island.fit[elite : elite + 1], fit])
    island.birth = np.concatenate([island.birth[elite : elite + 1], np.full(len(fit), g, dtype=np.int64)])
    island.age_limit = np.concatenate(
        [island.age_limit[elite : elite + 1], draw_age_limits(rng, len(fit), age_mean, age_var)]
    )
    alive = (g - island.birth) <= island.age_limit
    island.keep(alive)
    if island.size == 0:
        raise DegeneratePopulation(f"aging emptied island {island.id}")


class GeneticAlgorithm(IslandOptimizer):
    """Parameters (prefix ``ga.``): islands, popsize, gens, xoverprob,
    mutprob, mutscale, agelimit.mean, agelimit.var, immigrationroute."""

    namespace = "ga"
    default_route = "starvation"

    def __init__(self, params=None, *, xover=one_point_crossover, mutator=None, **kwargs):
        super().__init__(params, **kwargs)
        self.xover = xover
        self.mutator = mutator
        self.generation0_min: list[float] = []

    def _age(self, ctx):
        return (
            ctx.params.get_real("ga.agelimit.mean", 1e9),
            ctx.params.get_real("ga.agelimit.var", 0.0),
        )

    def _fill(self, ctx: RunContext, island: Island, n: int):
        X = random_population(ctx, island.rng, n)
        fit = ctx.evaluator.many(X)
        keep = np.isfinite(fit) | (not ctx.evaluator.exhausted)
        mean, var = self._age(ctx)
        island.add(
            {
                "X": X[keep],
                "fit": fit[keep],
                "birth": np.full(int(keep.sum()), island.generation, dtype=np.int64),
                "age_limit": draw_age_limits(island.rng, int(keep.sum()), mean, var),
                "extra": {},
            }
        )

    def init_island(self, ctx, island_id, rng):
        isl = empty_island(island_id, ctx.dim, rng)
        self._fill(ctx, isl, ctx.params.get_int("ga.popsize", 100))
        if isl.size:
            self.generation0_min.append(float(isl.fit.min()))
        return isl

    def step(self, ctx, island):
        popsize = ctx.params.get_int("ga.popsize", 100)
        if island.size == 0:
            island.generation += 1
            self._fill(ctx, island, popsize)
            return
        mutator = self.mutator or GaussianAlleleMutation(
            ctx.params.get_real("ga.mutprob", 0.1), ctx.params.get_real("ga.mutscale", 0.05)
        )
        mean, var = self._age(ctx)
        try:
            ga_generation(
                island,
                ctx.evaluator.many,
                ctx.params.get_real("ga.xoverprob", 0.7),
                mutator,
                ctx.lo,
                ctx.hi,
                popsize,
                mean,
                var,
                self.xover,
            )
        except DegeneratePopulation:
            pass  # an empty island waits for immigrants or refills next step
