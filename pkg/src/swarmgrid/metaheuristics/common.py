"""Island-model machinery shared by the population metaheuristics."""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from swarmgrid.core import Optimizer, RunContext, rng_stream
from swarmgrid.errors import BrokenBarrier, BudgetExhausted
from swarmgrid.exec_local import BatchExecutor, CyclicBarrier

FOREVER = 1 << 62

# --------------------------------------------------------------------------
# islands


@dataclass
class Individual:
    chromosome: np.ndarray
    fitness: float
    birth_generation: int
    age_limit: int


@dataclass
class Island:
    """A sub-population stored column-wise.

    ``extra`` holds per-member arrays that travel with a member when it
    migrates (velocities, personal bests, ...).
    """

    id: int
    X: np.ndarray
    fit: np.ndarray
    birth: np.ndarray
    age_limit: np.ndarray
    rng: np.random.Generator
    generation: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.X.shape[0]

    def individual(self, i: int) -> Individual:
        return Individual(self.X[i].copy(), float(self.fit[i]), int(self.birth[i]), int(self.age_limit[i]))

    def _columns(self):
        return ["X", "fit", "birth", "age_limit"]

    def take(self, idx) -> dict:
        idx = np.asarray(idx, dtype=int)
        out = {c: getattr(self, c)[idx].copy() for c in self._columns()}
        out["extra"] = {k: v[idx].copy() for k, v in self.extra.items()}
        return out

    def keep(self, mask) -> None:
        for c in self._columns():
            setattr(self, c, getattr(self, c)[mask])
        self.extra = {k: v[mask] for k, v in self.extra.items()}

    def add(self, members: dict) -> None:
        for c in self._columns():
            setattr(self, c, np.concatenate([getattr(self, c), members[c]]))
        for k in list(self.extra):
            if k in members["extra"]:
                self.extra[k] = np.concatenate([self.extra[k], members["extra"][k]])

    def best_index(self) -> int:
        return int(np.argmin(self.fit))


def empty_island(island_id: int, dim: int, rng) -> Island:
    return Island(
        island_id,
        np.empty((0, dim)),
        np.empty(0),
        np.empty(0, dtype=np.int64),
        np.empty(0, dtype=np.int64),
        rng,
    )


# --------------------------------------------------------------------------
# migration routes


def starvation_target(pops) -> int | None:
    """Lowest-id island that is empty or smaller than another island's size / 2.5."""
    pops = list(pops)
    biggest = max(pops) if pops else 0
    for i, p in enumerate(pops):
        if p == 0 or p < biggest / 2.5:
            return i
    return None


def starvation_route(my_id, generation, pops, params=None):
    target = starvation_target(pops)
    return None if target is None or target == my_id else target


def ring_route(my_id, n_islands_or_generation, pops=None, params=None):
    """Counter-clockwise ring: island ``i`` sends to ``i - 1`` (mod n).

    Callable as ``ring_route(my_id, n_islands)`` or with the full route
    signature ``(my_id, generation, pops, params)``.
    """
    n = len(pops) if pops is not None else n_islands_or_generation
    if n < 2:
        return None
    return (my_id + n - 1) % n


def no_route(my_id, generation, pops, params=None):
    return None


ROUTES = {"starvation": starvation_route, "ring": ring_route, "none": no_route}


def migrate(islands: list[Island], route: Callable, generation: int = 0, params=None) -> list[tuple[int, int, int]]:
    """Move up to two best members of each island along ``route``.

    Destinations are computed from one population snapshot, all emigrants are
    removed before any arrive.  Returns ``(source, destination, count)`` moves.
    """
    pops = [isl.size for isl in islands]
    moves = []
    outgoing = []
    for isl in islands:
        dest = route(isl.id, generation, pops, params)
        if dest is None or dest == isl.id or isl.size == 0:
            continue
        k = min(2, isl.size)
        idx = np.argsort(isl.fit, kind="stable")[:k]
        members = isl.take(idx)
        mask = np.ones(isl.size, dtype=bool)
        mask[idx] = False
        isl.keep(mask)
        outgoing.append((dest, members))
        moves.append((isl.id, dest, k))
    for dest, members in outgoing:
        islands[dest].add(members)
    return moves


# --------------------------------------------------------------------------
# selection, aging, annealing helpers


def roulette_weights(fit: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    """Minimization weights ``max_f - f_i + eps``; infeasible members get 0."""
    fit = np.asarray(fit, dtype=np.float64)
    finite = np.isfinite(fit)
    if not finite.any():
        return np.ones_like(fit)
    w = np.zeros_like(fit)
    w[finite] = fit[finite].max() - fit[finite] + eps
    return w


def roulette_select(weights: np.ndarray, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw ``n`` indices with probability proportional to ``weights``."""
    cum = np.cumsum(weights)
    u = rng.random(n) * cum[-1]
    return np.minimum(np.searchsorted(cum, u, side="right"), len(weights) - 1)


def draw_age_limits(rng, n, mean, var) -> np.ndarray:
    if var <= 0:
        return np.full(n, max(1, int(round(mean))), dtype=np.int64)
    draws = rng.normal(mean, math.sqrt(var), n)
    return np.maximum(1, np.round(draws)).astype(np.int64)


@dataclass(frozen=True)
class CoolingSchedule:
    kind: str = "linear"
    t0: float = 1000.0
    horizon: int = 1000
    rate: float = 0.95

    def temperature(self, k: int) -> float:
        return sa_temperature(self, k)


def sa_temperature(s: CoolingSchedule, k: int) -> float:
    if k < 0:
        raise ValueError("iteration index must be non-negative")
    if s.kind == "linear":
        return s.t0 * max(0.0, 1.0 - k / s.horizon)
    if s.kind == "exponential":
        return s.t0 * s.rate**k
    if s.kind == "boltzmann":
        return s.t0 / math.log(k + math.e)
    if s.kind == "cauchy":
        return s.t0 / (1.0 + k)
    raise ValueError(f"unknown cooling schedule '{s.kind}'")


def sa_accept(delta: float, T: float, u: float) -> bool:
    """Metropolis rule."""
    if delta <= 0:
        return True
    return T > 0 and u < math.exp(-delta / T)


# --------------------------------------------------------------------------
# island-model driver


class IslandOptimizer(Optimizer):
    """Thread-per-island driver.

    Subclasses implement ``init_island`` and ``step``.  With more than one
    island, every island thread meets at a barrier at the end of each
    generation; island 0 then performs migration while the others wait on a
    second barrier, so migration is deterministic per seed.
    """

    default_route = "starvation"

    def __init__(self, params=None, *, route: Callable | None = None, **kwargs):
        super().__init__(params, **kwargs)
        self.route = route
        self.trace: list[dict] = []

    def init_island(self, ctx: RunContext, island_id: int, rng) -> Island:
        raise NotImplementedError

    def step(self, ctx: RunContext, island: Island) -> None:
        raise NotImplementedError

    def _route(self, ctx):
        if self.route is not None:
            return self.route
        name = ctx.params.get_str(self.key("immigrationroute"), self.default_route)
        try:
            return ROUTES[name]
        except KeyError:
            raise ValueError(f"unknown immigration route '{name}'") from None

    def publish_island(self, ctx: RunContext, island: Island) -> None:
        if island.size:
            i = island.best_index()
            ctx.publish(island.X[i], float(island.fit[i]))

    def _run(self, ctx: RunContext) -> None:
        n_islands = ctx.params.get_int(self.key("islands"), 1)
        gens = ctx.params.get_int(self.key("gens"), FOREVER)
        route = self._route(ctx)
        self.trace = []
        islands = []
        for i in range(n_islands):
            isl = self.init_island(ctx, i, rng_stream(ctx.seed, i))
            self.publish_island(ctx, isl)
            islands.append(isl)
            if ctx.evaluator.exhausted:
                return
        self.islands = islands
        if n_islands == 1:
            for g in range(gens):
                self.step(ctx, islands[0])
                self.publish_island(ctx, islands[0])
                if ctx.evaluator.exhausted:
                    return
            return

        barrier = CyclicBarrier(n_islands)
        errors = []

        def body(isl: Island):
            try:
                for g in range(gens):
                    self.step(ctx, isl)
                    self.publish_island(ctx, isl)
                    if ctx.evaluator.exhausted:
                        barrier.abort()
                        return
                    if isl.id == 0:
                        barrier.wait()
                        pops = [x.size for x in islands]
                        moves = migrate(islands, route, g, ctx.params)
                        self.trace.append({"generation": g, "pops": pops, "moves": moves})
                        barrier.wait()
                    else:
                        barrier.wait()
                        barrier.wait()
            except BrokenBarrier:
                return
            except BudgetExhausted:
                barrier.abort()
            except Exception as exc:
                errors.append(exc)
                barrier.abort()

        with BatchExecutor(n_islands, name=type(self).__name__) as ex:
            ex.execute_batch([lambda isl=isl: body(isl) for isl in islands])
        if errors:
            raise errors[0]


def random_population(ctx: RunContext, rng, n: int) -> np.ndarray:
    return rng.uniform(ctx.lo, ctx.hi, size=(n, ctx.dim))
