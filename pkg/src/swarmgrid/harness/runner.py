"""Named method presets, single runs, comparison matrices and thread sweeps."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from swarmgrid.benchfns import SUITE, make_function
from swarmgrid.core import EvalBudget, Optimizer, ParamMap, RunContext
from swarmgrid.errors import ConfigError, UnknownFunction
from swarmgrid.gradient import AlternatingVariablesDescent, ArmijoSteepestDescent, ConjugateGradient
from swarmgrid.metaheuristics import OPTIMIZERS
from swarmgrid.stats import MethodResult, PairwiseCell, pairwise_matrix

OPTIMIZER_CLASSES: dict[str, type[Optimizer]] = {
    **OPTIMIZERS,
    "asd": ArmijoSteepestDescent,
    "fcg": ConjugateGradient,
    "avd": AlternatingVariablesDescent,
}

DESK_DIM = 50
DESK_REPS = 10
COMPARE_METHODS = (
    "ga", "sa", "ea", "de", "ps", "fa", "avd", "asd", "fcg", "mc",
    "gafcg", "eafcg", "psfcg", "defcg", "safcg",
)


class UnknownMethod(ConfigError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


@lru_cache(maxsize=None)
def load_presets() -> dict:
    text = resources.files("swarmgrid.harness").joinpath("presets_v1.json").read_text(encoding="utf-8")
    return json.loads(text)["presets"]


def preset(method: str) -> dict:
    try:
        return load_presets()[method]
    except KeyError:
        raise UnknownMethod(f"unknown method '{method}'") from None


class Hybrid(Optimizer):
    """Metaheuristic on the first half of the budget, then a local method on the rest.

    The local method starts from the metaheuristic's best point and restarts
    from random points until its share is spent.
    """

    namespace = "hybrid"

    def __init__(self, params=None, *, first: str, second: str, **kwargs):
        super().__init__(params, **kwargs)
        self.first = first
        self.second = second
        self.split: tuple[int, int] = (0, 0)

    def _run(self, ctx: RunContext) -> None:
        total = ctx.budget.remaining
        b1 = total // 2
        meta = build_optimizer(self.first, ctx.params, codec=self.codec, client=self.client)
        r1 = meta.minimize(ctx.f, EvalBudget(b1)) if b1 else None
        used1 = r1.evals_used if r1 else 0
        ctx.budget.reserve(used1)
        if r1 is not None:
            ctx.publish(r1.arg, r1.value)
        local_params = dict(ctx.params)
        if r1 is not None:
            local_params[f"{OPTIMIZER_CLASSES[preset(self.second)['optimizer']].namespace}.x0"] = tuple(
                float(v) for v in self.codec.to_argument(r1.arg)
            )
        local = build_optimizer(self.second, ParamMap(local_params), codec=self.codec, client=self.client)
        r2 = local.minimize(ctx.f, EvalBudget(total - used1))
        ctx.budget.reserve(r2.evals_used)
        ctx.publish(r2.arg, r2.value)
        self.split = (used1, r2.evals_used)


def build_optimizer(method: str, params=None, **kwargs) -> Optimizer:
    """Optimizer for a preset name (or a bare optimizer name); ``params`` override the preset."""
    user = dict(params or {})
    if method in load_presets():
        p = preset(method)
        if "hybrid" in p:
            first, second = p["hybrid"]
            return Hybrid(user, first=first, second=second, **kwargs)
        merged = {**p["params"], **user}
        cls = OPTIMIZER_CLASSES[p["optimizer"]]
        return cls(merged, **kwargs)
    if method in OPTIMIZER_CLASSES:
        return OPTIMIZER_CLASSES[method](user, **kwargs)
    raise UnknownMethod(f"unknown method '{method}'")


@dataclass
class RunRecord:
    method: str
    function: str
    dim: int
    seed: int
    value: float
    evals: int
    seconds: float
    arg: np.ndarray

    def result_line(self) -> str:
        return f"RESULT,{self.method},{self.function},{self.dim},{self.seed},{self.value!r},{self.evals},{self.seconds:.3f}"

    def arg_line(self, limit: int = 8) -> str:
        head = ";".join(repr(float(v)) for v in self.arg[:limit])
        more = f";...(+{len(self.arg) - limit})" if len(self.arg) > limit else ""
        return f"ARG,{self.method},{self.function},{head}{more}"


def run_once(method, function, dim, seed=0, budget=None, params=None, client=None, f=None) -> RunRecord:
    if f is None:
        f = make_function(function, dim, seed=0)
    p = dict(params or {})
    p["seed"] = seed
    p["budget"] = budget if budget is not None else 1000 * dim
    opt = build_optimizer(method, p, client=client)
    t0 = time.perf_counter()
    res = opt.minimize(f)
    return RunRecord(method, function, dim, seed, float(res.value), res.evals_used, time.perf_counter() - t0, res.arg)


# --------------------------------------------------------------------------
# comparison


@dataclass
class Comparison:
    methods: list[str]
    functions: list[str]
    records: list[RunRecord]
    results: list[MethodResult]
    cells: dict[tuple[str, str], PairwiseCell]

    def matrix_lines(self) -> list[str]:
        out = []
        for i, a in enumerate(self.methods):
            for b in self.methods[i + 1 :]:
                c = self.cells[(a, b)]
                out.append(f"MATRIX,{a},{b},{c.winner},{';'.join(c.significant_tests)}")
        return out

    def table(self) -> str:
        width = max(12, *(len(m) + 8 for m in self.methods))
        rows = ["".ljust(width) + "".join(m.ljust(width) for m in self.methods[1:])]
        for i, a in enumerate(self.methods[:-1]):
            cells = []
            for j, b in enumerate(self.methods[1:], start=1):
                cells.append((self.cells[(a, b)].label() if j > i else "").ljust(width))
            rows.append(a.ljust(width) + "".join(cells))
        return "\n".join(r.rstrip() for r in rows)


def compare(methods, functions=None, dim=DESK_DIM, reps=DESK_REPS, budget=None, seed=0, threads=1, progress=None) -> Comparison:
    """Run every (method, function, rep) cell, average per function, build the matrix."""
    methods = list(methods)
    if len(methods) < 2:
        raise ConfigError("compare needs at least two methods")
    functions = list(functions or SUITE)
    for m in methods:
        if m not in load_presets() and m not in OPTIMIZER_CLASSES:
            raise UnknownMethod(f"unknown method '{m}'")
    fns = {}
    for name in functions:
        fns[name] = make_function(name, dim, seed=0)  # raises UnknownFunction
    jobs = [(m, fn, seed + r) for m in methods for fn in functions for r in range(reps)]

    def job(m, fn, s):
        rec = run_once(m, fn, dim, s, budget, f=fns[fn])
        if progress:
            progress(rec)
        return rec

    if threads > 1:
        from swarmgrid.exec_local import BatchExecutor, FailedResult

        with BatchExecutor(threads, name="compare") as ex:
            records = ex.execute_batch([lambda j=j: job(*j) for j in jobs])
        for r in records:
            if isinstance(r, FailedResult):
                raise RuntimeError(f"comparison run failed: {r.error}")
    else:
        records = [job(*j) for j in jobs]

    results = []
    for m in methods:
        means = [
            float(np.mean([r.value for r in records if r.method == m and r.function == fn])) for fn in functions
        ]
        results.append(MethodResult(m, means))
    return Comparison(methods, functions, records, results, pairwise_matrix(results))


# --------------------------------------------------------------------------
# thread sweeps


@dataclass(frozen=True)
class SpeedupRow:
    threads: int
    seconds: float
    speedup: float
    efficiency: float

    def line(self) -> str:
        return f"SPEEDUP,{self.threads},{self.seconds:.3f},{self.speedup:.2f},{self.efficiency:.2f}"


def speedup_rows(threads, times) -> list[SpeedupRow]:
    threads, times = list(threads), list(times)
    if not threads or threads[0] != 1:
        raise ValueError("thread list must start at 1")
    t1 = times[0]
    return [SpeedupRow(n, t, t1 / t, t1 / t / n) for n, t in zip(threads, times)]


def speedup(cfg, threads) -> list[SpeedupRow]:
    """Time one run per thread count with the same seed, barrier off."""
    f = make_function(cfg.function, cfg.dim, seed=0)
    ns = OPTIMIZER_CLASSES[preset(cfg.optimizer)["optimizer"] if cfg.optimizer in load_presets() else cfg.optimizer].namespace
    def params_for(n):
        p = dict(cfg.params)
        p[f"{ns}.numthreads"] = n
        if ns == "de":
            p["de.nondeterminismok"] = True
        return p

    # untimed warm-up on the timed code path, so compilation and cache loading
    # are not charged to the first row
    run_once(cfg.optimizer, cfg.function, cfg.dim, cfg.seed, min(cfg.budget, 5000), params_for(threads[0]), f=f)
    times = []
    for n in threads:
        rec = run_once(cfg.optimizer, cfg.function, cfg.dim, cfg.seed, cfg.budget, params_for(n), f=f)
        times.append(rec.seconds)
    return speedup_rows(threads, times)


__all__ = [
    "Comparison",
    "Hybrid",
    "RunRecord",
    "SpeedupRow",
    "UnknownFunction",
    "UnknownMethod",
    "build_optimizer",
    "compare",
    "load_presets",
    "run_once",
    "speedup",
    "speedup_rows",
]
