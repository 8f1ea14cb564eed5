"""Steepest descent, nonlinear conjugate gradient and alternating-variables descent."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from swarmgrid.core import Optimizer, RunContext, rng_stream
from swarmgrid.errors import BudgetExhausted, LineSearchFailed
from swarmgrid.exec_local import BatchExecutor, FailedResult
from swarmgrid.gradient.linesearch import LineSearchParams, armijo_step, bracket_section_search
from swarmgrid.gradient.numgrad import numerical_gradient


class _Tracker:
    """Best point seen by one descent, kept even when the budget runs out."""

    def __init__(self, on_improve=None):
        self.x = None
        self.f = math.inf
        self.iterations = 0
        self.on_improve = on_improve

    def offer(self, x, f):
        if f < self.f:
            self.x, self.f = np.array(x, dtype=np.float64), float(f)
            if self.on_improve is not None:
                self.on_improve(self.x, self.f)


def _grad(fn, x, h, executor):
    return numerical_gradient(fn, x, h=h if h is not None else None, executor=executor)


def steepest_descent(fn, x0, p: LineSearchParams, gtol=1e-6, max_iter=10_000, h=None, executor=None, tracker=None):
    """Armijo steepest descent from one start; returns ``(x, f)``."""
    tr = tracker or _Tracker()
    x = np.array(x0, dtype=np.float64)
    try:
        fx = fn(x)
        tr.offer(x, fx)
        for _ in range(max_iter):
            g = _grad(fn, x, h, executor)
            if np.max(np.abs(g)) <= gtol:
                break
            d = -g
            try:
                t, f_new = armijo_step(fn, x, d, g, p.rho, p.beta, p.gamma, fx=fx)
            except LineSearchFailed:
                break
            x, fx = x + t * d, f_new
            tr.offer(x, fx)
            tr.iterations += 1
    except BudgetExhausted:
        pass
    return tr.x, tr.f


def conjugate_gradient(
    fn, x0, p: LineSearchParams, update="fr", gtol=1e-6, max_iter=10_000, h=None, executor=None, tracker=None
):
    """Nonlinear CG (Fletcher-Reeves or Polak-Ribiere+) from one start; returns ``(x, f)``."""
    if update not in ("fr", "pr"):
        raise ValueError(f"unknown CG update '{update}'")
    tr = tracker or _Tracker()
    x = np.array(x0, dtype=np.float64)
    n = x.shape[0]
    try:
        fx = fn(x)
        tr.offer(x, fx)
        g = _grad(fn, x, h, executor)
        d = -g
        since_restart = 0
        last_reduction = None
        for _ in range(max_iter):
            if np.max(np.abs(g)) <= gtol:
                break
            slope = float(g @ d)
            if slope >= 0:
                d, slope, since_restart = -g, float(-(g @ g)), 0
            alpha1 = 1.0 if last_reduction is None else min(1.0, 2.0 * last_reduction / -slope)

            def phi(a, x=x, d=d):
                return fn(x + a * d)

            def dphi(a, x=x, d=d):
                ga = _grad(fn, x + a * d, h, executor)
                return float(ga @ d), ga

            try:
                a, f_new, g_new = bracket_section_search(phi, dphi, fx, slope, alpha1, p, last_reduction)
            except LineSearchFailed:
                if since_restart == 0:
                    break
                d, since_restart, last_reduction = -g, 0, None
                continue
            x = x + a * d
            if g_new is None:
                g_new = _grad(fn, x, h, executor)
            last_reduction = fx - f_new
            fx = f_new
            tr.offer(x, fx)
            tr.iterations += 1
            gg = float(g @ g)
            if update == "fr":
                beta = float(g_new @ g_new) / gg
            else:
                beta = max(0.0, float(g_new @ (g_new - g)) / gg)
            since_restart += 1
            if since_restart >= n:
                d, since_restart = -g_new, 0
            else:
                d = -g_new + beta * d
            g = g_new
    except BudgetExhausted:
        pass
    return tr.x, tr.f


def fr_beta(g_new, g_old) -> float:
    return float(g_new @ g_new) / float(g_old @ g_old)


def pr_beta(g_new, g_old) -> float:
    return max(0.0, float(g_new @ (g_new - g_old)) / float(g_old @ g_old))


def _multi_start(run_one, starts, executor):
    if executor is None or len(starts) == 1:
        return [run_one(s) for s in starts]
    results = executor.execute_batch([lambda s=s: run_one(s) for s in starts])
    return [r for r in results if not isinstance(r, FailedResult)]


def asd_run(fn, starts, p: LineSearchParams = LineSearchParams(), gtol=1e-6, max_iter=10_000, h=None, executor=None):
    """Best ``(x, f)`` of Armijo steepest descent over ``starts`` (possibly concurrent)."""
    res = _multi_start(lambda s: steepest_descent(fn, s, p, gtol, max_iter, h), list(starts), executor)
    return min((r for r in res if r[0] is not None), key=lambda r: r[1])


def cg_run(fn, starts, update="fr", p: LineSearchParams = LineSearchParams(), gtol=1e-6, max_iter=10_000, h=None, executor=None):
    res = _multi_start(lambda s: conjugate_gradient(fn, s, p, update, gtol, max_iter, h), list(starts), executor)
    return min((r for r in res if r[0] is not None), key=lambda r: r[1])


# --------------------------------------------------------------------------
# alternating variables


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float


@dataclass(frozen=True)
class Discrete:
    values: tuple

    def __init__(self, values):
        object.__setattr__(self, "values", tuple(float(v) for v in values))
        if not self.values:
            raise ValueError("discrete domain is empty")


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(h, lo, hi, tol):
    """Minimize a 1-D function on ``[lo, hi]``; returns ``(t, h(t))``."""
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = h(c), h(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = h(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = h(d)
    return (c, fc) if fc <= fd else (d, fd)


def avd_run(fn, x0, domains, order=None, sweep_tol=1e-12, max_sweeps=1000, line_tol=None, tracker=None):
    """Cyclic coordinate descent; returns ``(x, f, sweeps)``.

    Continuous coordinates use golden-section search over their interval;
    discrete ones are scanned exhaustively (through ``fn.many`` when the
    evaluator offers it, so the scan may run remotely).  A coordinate only
    moves when the objective strictly improves.
    """
    tr = tracker or _Tracker()
    x = np.array(x0, dtype=np.float64)
    for j, dom in enumerate(domains):
        if isinstance(dom, Discrete):
            vals = np.asarray(dom.values)
            x[j] = vals[np.argmin(np.abs(vals - x[j]))]
    order = list(range(x.shape[0])) if order is None else [int(i) for i in order]
    sweeps = 0
    try:
        fx = fn(x)
        tr.offer(x, fx)
        while sweeps < max_sweeps:
            f_start = fx
            sweeps += 1
            for j in order:
                dom = domains[j]
                if isinstance(dom, Discrete):
                    cand = np.repeat(x[None, :], len(dom.values), axis=0)
                    cand[:, j] = dom.values
                    if hasattr(fn, "many"):
                        vals = fn.many(cand)
                        if fn.exhausted:
                            ok = np.isfinite(vals)
                            if ok.any():
                                k = int(np.argmin(vals))
                                if vals[k] < fx:
                                    x, fx = cand[k].copy(), float(vals[k])
                                    tr.offer(x, fx)
                            raise BudgetExhausted("budget exhausted in discrete scan")
                    else:
                        vals = np.array([fn(c) for c in cand])
                    k = int(np.argmin(vals))
                    t, ft = dom.values[k], float(vals[k])
                else:
                    tol = line_tol if line_tol is not None else 1e-10 * max(1.0, dom.hi - dom.lo)

                    def h(t, j=j):
                        y = x.copy()
                        y[j] = t
                        v = fn(y)
                        tr.offer(y, v)
                        return v

                    t, ft = golden_section(h, dom.lo, dom.hi, tol)
                if ft < fx:
                    x = x.copy()
                    x[j] = t
                    fx = ft
                    tr.offer(x, fx)
            tr.iterations = sweeps
            if f_start - fx < sweep_tol:
                break
    except BudgetExhausted:
        pass
    return tr.x, tr.f, sweeps


class AVDObserver:
    """Runs AVD from every new incumbent of the subject and republishes improvements."""

    def __init__(self, fn, domains, max_sweeps=50):
        self.fn = fn
        self.domains = domains
        self.max_sweeps = max_sweeps
        self.runs = 0

    def notify(self, channel, arg, value):
        self.runs += 1
        x, f, _ = avd_run(self.fn, arg, self.domains, max_sweeps=self.max_sweeps)
        if x is not None and f < value:
            channel.publish(x, f, source=self)


# --------------------------------------------------------------------------
# optimizer front ends (restart until the budget is spent)


def _line_params(params, ns) -> LineSearchParams:
    base = LineSearchParams()
    return LineSearchParams(
        rho=params.get_real(f"{ns}.rho", base.rho),
        beta=params.get_real(f"{ns}.beta", base.beta),
        gamma=params.get_real(f"{ns}.gamma", base.gamma),
        sigma=params.get_real(f"{ns}.sigma", base.sigma),
        t1=params.get_real(f"{ns}.t1", base.t1),
        t2=params.get_real(f"{ns}.t2", base.t2),
        t3=params.get_real(f"{ns}.t3", base.t3),
        bracket_reduction=params.get_real(f"{ns}.redrate", base.bracket_reduction),
    )


class _RestartingDescent(Optimizer):
    """Local search from ``<ns>.x0`` (else a random point), then random restarts.

    Up to ``<ns>.numthreads`` starts run concurrently; ``<ns>.maxstarts``
    bounds the number of starts (default: until the budget is spent).
    """

    def _descend(self, ctx: RunContext, x0, tracker):
        raise NotImplementedError

    def _run(self, ctx: RunContext) -> None:
        ns = self.namespace
        n_threads = ctx.params.get_int(f"{ns}.numthreads", 1)
        max_starts = ctx.params.get_int(f"{ns}.maxstarts", 1 << 30)
        x0 = ctx.params.get_vec(f"{ns}.x0", None)

        def start_point(k):
            if k == 0 and x0 is not None:
                return np.clip(x0, ctx.lo, ctx.hi)
            return rng_stream(ctx.seed, k).uniform(ctx.lo, ctx.hi)

        def one(k):
            tracker = _Tracker(on_improve=ctx.publish)
            self._descend(ctx, start_point(k), tracker)
            return tracker.f

        k = 0
        executor = BatchExecutor(n_threads, name=ns) if n_threads > 1 else None
        try:
            while k < max_starts and not ctx.budget.exhausted:
                batch = list(range(k, min(k + n_threads, max_starts)))
                if executor is None:
                    for s in batch:
                        one(s)
                else:
                    executor.execute_batch([lambda s=s: one(s) for s in batch])
                k += len(batch)
        finally:
            if executor is not None:
                executor.shutdown()


class ArmijoSteepestDescent(_RestartingDescent):
    namespace = "asd"

    def _descend(self, ctx, x0, tracker):
        p = _line_params(ctx.params, "asd")
        steepest_descent(
            ctx.evaluator,
            x0,
            p,
            gtol=ctx.params.get_real("asd.gtol", 1e-6),
            max_iter=ctx.params.get_int("asd.maxiter", 10_000),
            h=ctx.params.get_real("grad.h", None),
            tracker=tracker,
        )


class ConjugateGradient(_RestartingDescent):
    namespace = "fcg"

    def _descend(self, ctx, x0, tracker):
        p = _line_params(ctx.params, "fcg")
        conjugate_gradient(
            ctx.evaluator,
            x0,
            p,
            update=ctx.params.get_str("fcg.update", "fr"),
            gtol=ctx.params.get_real("fcg.gtol", 1e-6),
            max_iter=ctx.params.get_int("fcg.maxiter", 10_000),
            h=ctx.params.get_real("grad.h", None),
            tracker=tracker,
        )


class AlternatingVariablesDescent(_RestartingDescent):
    """AVD over the search box; ``avd.quantum`` (real or vector) > 0 makes a
    coordinate discrete on the grid of integer multiples inside the box."""

    namespace = "avd"

    def domains(self, ctx):
        q = np.broadcast_to(ctx.params.get_real_or_vec("avd.quantum", 0.0), (ctx.dim,))
        doms = []
        for lo, hi, step in zip(ctx.lo, ctx.hi, q):
            if step > 0:
                doms.append(Discrete(np.arange(math.ceil(lo / step), math.floor(hi / step) + 1) * step))
            else:
                doms.append(Interval(float(lo), float(hi)))
        return doms

    def _descend(self, ctx, x0, tracker):
        order = ctx.params.get_vec("avd.tryorder", None)
        avd_run(
            ctx.evaluator,
            x0,
            self.domains(ctx),
            order=None if order is None else order.astype(int),
            max_sweeps=ctx.params.get_int("avd.maxsweeps", 1000),
            tracker=tracker,
        )
