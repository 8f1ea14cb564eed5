"""Fourth-order Richardson (five-point central difference) gradients."""

from __future__ import annotations

import numpy as np

from swarmgrid.errors import BudgetExhausted
from swarmgrid.exec_local import FailedResult


def default_steps(x: np.ndarray, rel: float = 1e-5) -> np.ndarray:
    return rel * np.maximum(1.0, np.abs(x))


def probe_points(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """The 4·D probe points, grouped per component as x+2h, x+h, x-h, x-2h."""
    d = x.shape[0]
    offsets = np.array([2.0, 1.0, -1.0, -2.0])
    P = np.repeat(x[None, :], 4 * d, axis=0)
    for j in range(d):
        P[4 * j : 4 * j + 4, j] = x[j] + offsets * h[j]
    return P


def combine(values: np.ndarray, h: np.ndarray) -> np.ndarray:
    v = values.reshape(-1, 4)
    return (-v[:, 0] + 8.0 * v[:, 1] - 8.0 * v[:, 2] + v[:, 3]) / (12.0 * h)


def numerical_gradient(fn, x, h=None, executor=None) -> np.ndarray:
    """Estimate the gradient of ``fn`` at ``x`` with 4·D evaluations.

    ``fn`` is any callable; when it is an :class:`~swarmgrid.core.Evaluator`
    the probes go through its batch path (which may be remote) and the budget
    is charged per probe.  With an ``executor`` the components are split
    across its pool threads.
    """
    x = np.asarray(x, dtype=np.float64)
    if h is None:
        h = default_steps(x)
    h = np.broadcast_to(np.asarray(h, dtype=np.float64), x.shape).copy()
    if np.any(h <= 0):
        raise ValueError("gradient step must be positive")
    P = probe_points(x, h)
    if executor is not None and executor.pool_size > 1:
        parts = np.array_split(np.arange(P.shape[0]).reshape(-1, 4), executor.pool_size)
        parts = [p.ravel() for p in parts if p.size]
        results = executor.execute_batch([_ProbeTask(fn, P[idx]) for idx in parts])
        for r in results:
            if isinstance(r, FailedResult):
                if r.error.startswith("BudgetExhausted"):
                    raise BudgetExhausted("budget exhausted during gradient estimation")
                raise RuntimeError(f"gradient probe failed: {r.error}")
        values = np.concatenate(results)
    elif hasattr(fn, "many"):
        values = fn.many(P)
        if fn.exhausted:
            raise BudgetExhausted("budget exhausted during gradient estimation")
    else:
        values = np.array([fn(p) for p in P])
    return combine(values, h)


class _ProbeTask:
    def __init__(self, fn, points):
        self.fn = fn
        self.points = points

    def run(self):
        if hasattr(self.fn, "many"):
            out = self.fn.many(self.points)
            if self.fn.exhausted:
                raise BudgetExhausted("budget exhausted during gradient estimation")
            return out
        return np.array([self.fn(p) for p in self.points])
