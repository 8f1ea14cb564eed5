"""Differential evolution (rand/1/bin and best/1/bin) with optional determinism barrier.

Two execution modes, selected by ``de.nondeterminismok``:

* barrier on (default): generation-synchronous.  The leader draws one random
  block for the whole generation, builds every trial from the current
  population snapshot, worker threads evaluate disjoint slices, and
  replacements land in a second buffer after all threads have finished.  The
  result is bit-identical for any thread count.
* barrier off: every thread updates its own slice of one shared population
  in place, reading other slices while they change and using the live best.
  For registry functions the whole per-thread run is a single compiled
  ``nogil`` kernel, so threads truly overlap.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from swarmgrid.benchfns import evaluate_kernel, evaluate_rows
from swarmgrid.core import Optimizer, RunContext, rng_stream
from swarmgrid.errors import BudgetExhausted, MissingConfig
from swarmgrid.exec_local import BatchExecutor, FailedResult
from swarmgrid.metaheuristics.common import FOREVER

RAND1BIN = 0
BEST1BIN = 1
VARIANTS = {"rand1bin": RAND1BIN, "best1bin": BEST1BIN}
N_CTRL = 4  # u_a, u_b, u_c, u_jrand precede the D crossover uniforms


@njit(nogil=True, cache=True)
def pick_distinct(i, ua, ub, uc, n):
    """Three indices, distinct from each other and from ``i``, from uniforms in [0, 1)."""
    a = int(ua * (n - 1))
    if a >= i:
        a += 1
    lo1, hi1 = min(i, a), max(i, a)
    b = int(ub * (n - 2))
    if b >= lo1:
        b += 1
    if b >= hi1:
        b += 1
    s0, s1, s2 = lo1, hi1, b
    if s2 < s1:
        s1, s2 = s2, s1
    if s1 < s0:
        s0, s1 = s1, s0
    c = int(uc * (n - 3))
    if c >= s0:
        c += 1
    if c >= s1:
        c += 1
    if c >= s2:
        c += 1
    return a, b, c


@njit(nogil=True, cache=True)
def donor(xa, xb, xc, w):
    return xa + w * (xb - xc)


@njit(nogil=True, cache=True)
def build_trial(X, i, u, base, w, pc, lo, hi, out):
    """Write the trial for member ``i`` into ``out``.

    ``u`` holds ``N_CTRL + D`` uniforms; ``base < 0`` means rand/1 (base is
    member ``a``), otherwise ``base`` is the best member's index.
    """
    n, d = X.shape
    a, b, c = pick_distinct(i, u[0], u[1], u[2], n)
    bi = a if base < 0 else base
    jrand = int(u[3] * d)
    for j in range(d):
        if u[N_CTRL + j] < pc or j == jrand:
            v = X[bi, j] + w * (X[b, j] - X[c, j])
            out[j] = min(max(v, lo[j]), hi[j])
        else:
            out[j] = X[i, j]


@njit(nogil=True, cache=True)
def build_trials(X, U, count, base, w, pc, lo, hi):
    d = X.shape[1]
    T = np.empty((count, d))
    for i in range(count):
        build_trial(X, i, U[i], base, w, pc, lo, hi, T[i])
    return T


@njit(nogil=True, cache=True)
def free_run_kernel(X, fit, best, start, end, quota, seed, variant, w, pc, lo, hi, fid, shift, bias):
    """Unsynchronized DE on rows ``[start, end)`` of the shared population.

    Runs until ``quota`` evaluations are spent.  ``best[0]`` is the shared
    best index, read and written without locking.
    """
    np.random.seed(seed)
    n, d = X.shape
    u = np.empty(N_CTRL + d)
    trial = np.empty(d)
    done = 0
    while done < quota:
        for i in range(start, end):
            if done >= quota:
                break
            for k in range(N_CTRL + d):
                u[k] = np.random.random()
            base = best[0] if variant == BEST1BIN else -1
            build_trial(X, i, u, base, w, pc, lo, hi, trial)
            ft = evaluate_kernel(fid, trial, shift, bias)
            done += 1
            if not np.isfinite(ft):
                ft = np.inf
            if ft <= fit[i]:
                X[i, :] = trial
                fit[i] = ft
                if ft < fit[best[0]]:
                    best[0] = i
    return done


@njit(nogil=True, cache=True)
def _eval_slice(fid, T, shift, bias):
    out = evaluate_rows(fid, T, shift, bias)
    for r in range(out.shape[0]):
        if not np.isfinite(out[r]):
            out[r] = np.inf
    return out


def de_generation(X, fit, U, granted, variant, w, pc, lo, hi, evaluate, best=None):
    """One synchronous generation; returns the new ``(X, fit)``.

    ``U`` is the ``(pop, 4 + D)`` uniform block for this generation.  Only
    members with index below ``granted`` get a trial; ``evaluate`` maps a
    trial matrix to fitness values.
    """
    if best is None:
        best = int(np.argmin(fit))
    base = best if variant == BEST1BIN else -1
    T = build_trials(X, U, granted, base, w, pc, lo, hi)
    ft = evaluate(T)
    newX, newfit = X.copy(), fit.copy()
    keep = ft <= fit[:granted]
    newX[:granted][keep] = T[keep]
    newfit[:granted][keep] = ft[keep]
    return newX, newfit


def slices(n: int, parts: int) -> list[tuple[int, int]]:
    """Contiguous near-equal ``[start, end)`` ranges, larger ones first."""
    q, r = divmod(n, parts)
    out, s = [], 0
    for t in range(parts):
        e = s + q + (1 if t < r else 0)
        out.append((s, e))
        s = e
    return out


class DifferentialEvolution(Optimizer):
    """Parameters (prefix ``de.``): pop, gens, w, pc, variant, numthreads,
    nondeterminismok."""

    namespace = "de"

    def _settings(self, ctx):
        p = ctx.params
        name = p.get_str("de.variant", "rand1bin")
        if name not in VARIANTS:
            raise ValueError(f"unknown DE variant '{name}'")
        pop = p.get_int("de.pop", 100)
        if pop < 4:
            raise ValueError("DE needs a population of at least 4")
        return dict(
            pop=pop,
            gens=p.get_int("de.gens", FOREVER),
            w=p.get_real("de.w", 0.5),
            pc=p.get_real("de.pc", 0.8),
            variant=VARIANTS[name],
            threads=max(1, p.get_int("de.numthreads", 1)),
            free=p.get_bool("de.nondeterminismok", False),
        )

    def _kernel(self, ctx):
        ev = ctx.evaluator
        k = getattr(ctx.f, "kernel", None)
        if k is None or ev.client is not None or not ev.codec.identity:
            return None
        return k

    def _run(self, ctx: RunContext) -> None:
        s = self._settings(ctx)
        rng = rng_stream(ctx.seed, 0)
        X = rng.uniform(ctx.lo, ctx.hi, size=(s["pop"], ctx.dim))
        granted = ctx.budget.reserve(s["pop"])
        if granted == 0:
            raise BudgetExhausted("no budget for the initial population")
        fit = np.full(s["pop"], np.inf)
        fit[:granted] = ctx.evaluator.evaluate_reserved(X[:granted])
        self._publish(ctx, X, fit)
        if granted < s["pop"] or s["gens"] == 0:
            ctx.evaluator.exhausted = granted < s["pop"]
            return
        # free-running kernels always go to pool threads: numba's RNG is about
        # twice as slow on the interpreter's main thread, which would skew timings
        use_pool = s["threads"] > 1 or s["free"]
        ex = BatchExecutor(s["threads"], name="de") if use_pool else None
        try:
            if s["free"]:
                self._free(ctx, s, X, fit, ex)
            else:
                self._synchronous(ctx, s, X, fit, rng, ex)
        finally:
            if ex is not None:
                ex.shutdown()

    def _publish(self, ctx, X, fit):
        b = int(np.argmin(fit))
        ctx.publish(X[b], float(fit[b]))

    def _evaluate_split(self, ctx, ex, kernel):
        """Trial-matrix evaluator that spreads rows over the executor."""
        ev = ctx.evaluator

        def one(T):
            if kernel is not None:
                fid, shift, bias = kernel
                return _eval_slice(fid, T, shift, bias)
            return ev.evaluate_reserved(T)

        def evaluate(T):
            if ex is None or T.shape[0] < 2:
                return one(T)
            parts = [T[a:b] for a, b in slices(T.shape[0], ex.pool_size) if b > a]
            res = ex.execute_batch([lambda P=P: one(P) for P in parts])
            for r in res:
                if isinstance(r, FailedResult):
                    raise RuntimeError(f"DE evaluation thread failed: {r.error}: {r.detail}")
            return np.concatenate(res)

        return evaluate

    def _synchronous(self, ctx, s, X, fit, rng, ex):
        pop, d = X.shape
        evaluate = self._evaluate_split(ctx, ex, self._kernel(ctx))
        for _ in range(s["gens"]):
            U = rng.random((pop, N_CTRL + d))
            granted = ctx.budget.reserve(pop)
            if granted == 0:
                ctx.evaluator.exhausted = True
                return
            X, fit = de_generation(X, fit, U, granted, s["variant"], s["w"], s["pc"], ctx.lo, ctx.hi, evaluate)
            self._publish(ctx, X, fit)
            if granted < pop:
                ctx.evaluator.exhausted = True
                return
        self.population = (X, fit)

    def _free(self, ctx, s, X, fit, ex):
        pop, d = X.shape
        n_threads = s["threads"]
        parts = slices(pop, n_threads)
        want = [(e - b) * s["gens"] if s["gens"] < FOREVER // max(pop, 1) else FOREVER for b, e in parts]
        remaining = ctx.budget.remaining
        quotas, left = [], remaining
        for (b, e), wnt in zip(parts, want):
            # share the remaining budget in proportion to slice size
            share = remaining * (e - b) // pop
            quotas.append(min(wnt, share))
            left -= quotas[-1]
        for t in range(len(quotas)):
            if left <= 0:
                break
            extra = min(left, want[t] - quotas[t])
            quotas[t] += extra
            left -= extra
        granted = ctx.budget.reserve(sum(quotas))
        assert granted == sum(quotas)
        if sum(quotas) < sum(want):
            ctx.evaluator.exhausted = True
        best = np.array([int(np.argmin(fit))], dtype=np.int64)
        kernel = self._kernel(ctx)
        seeds = [int(rng_stream(ctx.seed, 1, t).integers(1 << 31)) for t in range(n_threads)]

        if kernel is not None:
            fid, shift, bias = kernel

            def body(t):
                b, e = parts[t]
                return free_run_kernel(
                    X, fit, best, b, e, quotas[t], seeds[t], s["variant"], s["w"], s["pc"],
                    ctx.lo, ctx.hi, fid, shift, bias,
                )
        else:
            ev = ctx.evaluator

            def body(t):
                b, e = parts[t]
                trng = np.random.default_rng(seeds[t])
                trial = np.empty(d)
                done = 0
                while done < quotas[t]:
                    for i in range(b, e):
                        if done >= quotas[t]:
                            break
                        u = trng.random(N_CTRL + d)
                        base = int(best[0]) if s["variant"] == BEST1BIN else -1
                        build_trial(X, i, u, base, s["w"], s["pc"], ctx.lo, ctx.hi, trial)
                        ft = float(ev.evaluate_reserved(trial[None, :])[0])
                        done += 1
                        if ft <= fit[i]:
                            X[i] = trial
                            fit[i] = ft
                            if ft < fit[best[0]]:
                                best[0] = i
                                ctx.publish(trial.copy(), ft)
                return done

        if ex is None:
            body(0)
        else:
            res = ex.execute_batch([lambda t=t: body(t) for t in range(n_threads)])
            for r in res:
                if isinstance(r, FailedResult):
                    raise RuntimeError(f"DE thread failed: {r.error}: {r.detail}")
        self._publish(ctx, X, fit)
        self.population = (X, fit)


def de_run(f, params, budget=None):
    """Convenience wrapper: ``DifferentialEvolution(params).minimize(f, budget)``."""
    if params is None:
        raise MissingConfig("DE needs parameters")
    return DifferentialEvolution(params).minimize(f, budget)
