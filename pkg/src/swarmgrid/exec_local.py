"""In-process batch executor, cyclic barrier and accumulators.

The executor keeps one queue per pool thread.  Batch tasks are dealt
round-robin from a rotating offset, which spreads every batch across the
whole pool and gives :meth:`BatchExecutor.execute_on_all_threads` a direct
way to reach each thread exactly once.
"""

from __future__ import annotations

import itertools
import logging
import operator
import queue
import threading
import traceback
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Any

from swarmgrid.errors import BrokenBarrier, ExecutorShutDown, SwarmGridError

log = logging.getLogger(__name__)

_STOP = object()


@dataclass(frozen=True)
class FailedResult:
    """In-slot marker for a task that raised."""

    index: int
    error: str
    detail: str = ""

    def __bool__(self):
        return False


class AllThreadsFailed(SwarmGridError):
    def __init__(self, failures):
        super().__init__(f"{len(failures)} pool thread(s) failed: {failures[0].error}")
        self.failures = failures


def _run_task(task):
    if hasattr(task, "run"):
        return task.run()
    return task()


class _Pending:
    """Result slots plus a countdown for one submitted batch."""

    def __init__(self, n):
        self.results: list[Any] = [None] * n
        self.remaining = n
        self.lock = threading.Lock()
        self.done = threading.Event()
        if n == 0:
            self.done.set()

    def complete(self, index, value):
        self.results[index] = value
        with self.lock:
            self.remaining -= 1
            if self.remaining == 0:
                self.done.set()


class BatchExecutor:
    """Fixed pool of eagerly started threads running blocking task batches.

    A task is any zero-argument callable or object with ``run()``.
    """

    def __init__(self, pool_size: int, name: str = "pool"):
        if pool_size < 1:
            raise ValueError("pool_size must be positive")
        self.pool_size = pool_size
        self.name = name
        self._queues = [queue.SimpleQueue() for _ in range(pool_size)]
        self._offset = itertools.count()
        self._state_lock = threading.Lock()
        self._running = True
        self._locals = [dict() for _ in range(pool_size)]
        self._tls = threading.local()
        self._threads = [
            threading.Thread(target=self._loop, args=(i,), name=f"{name}-{i}", daemon=True)
            for i in range(pool_size)
        ]
        for t in self._threads:
            t.start()

    # -- thread body -------------------------------------------------------

    def _loop(self, index):
        self._tls.index = index
        q = self._queues[index]
        while True:
            item = q.get()
            if item is _STOP:
                return
            pending, slot, task = item
            try:
                value = _run_task(task)
            except BaseException as exc:  # noqa: BLE001 - failures are values here
                value = FailedResult(slot, f"{type(exc).__name__}: {exc}", traceback.format_exc())
            pending.complete(slot, value)

    # -- public API --------------------------------------------------------

    @property
    def running(self) -> bool:
        return self._running

    def thread_index(self) -> int | None:
        """Pool index of the calling thread, or None outside the pool."""
        return getattr(self._tls, "index", None)

    def thread_state(self) -> dict:
        """Per-thread mutable dict for the calling pool thread."""
        idx = self.thread_index()
        if idx is None:
            raise RuntimeError("thread_state() called outside the pool")
        return self._locals[idx]

    def execute_batch(self, tasks: Sequence) -> list:
        """Run ``tasks`` and block until all finish; results in task order."""
        tasks = list(tasks)
        if not tasks:
            raise ValueError("empty task batch")
        pending = _Pending(len(tasks))
        with self._state_lock:
            if not self._running:
                raise ExecutorShutDown("executor has been shut down")
            start = next(self._offset)
            for i, task in enumerate(tasks):
                self._queues[(start + i) % self.pool_size].put((pending, i, task))
        pending.done.wait()
        return pending.results

    def execute_on_all_threads(self, cmd) -> None:
        """Run ``cmd`` exactly once on every pool thread before returning."""
        pending = _Pending(self.pool_size)
        with self._state_lock:
            if not self._running:
                raise ExecutorShutDown("executor has been shut down")
            for i, q in enumerate(self._queues):
                q.put((pending, i, cmd))
        pending.done.wait()
        failures = [r for r in pending.results if isinstance(r, FailedResult)]
        if failures:
            raise AllThreadsFailed(failures)

    def shutdown(self, wait: bool = True) -> None:
        with self._state_lock:
            if not self._running:
                return
            self._running = False
            for q in self._queues:
                q.put(_STOP)
        if wait:
            for t in self._threads:
                if t is not threading.current_thread():
                    t.join()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()


class CyclicBarrier:
    """Reusable barrier whose ``wait`` returns the released generation index."""

    def __init__(self, parties: int):
        if parties < 1:
            raise ValueError("parties must be positive")
        self.parties = parties
        self.generation = 0
        self._arrived = 0
        self._broken = False
        self._cond = threading.Condition()

    def wait(self, timeout: float | None = None) -> int:
        with self._cond:
            if self._broken:
                raise BrokenBarrier("barrier is broken")
            gen = self.generation
            self._arrived += 1
            if self._arrived == self.parties:
                self._arrived = 0
                self.generation += 1
                self._cond.notify_all()
                return gen
            released = self._cond.wait_for(lambda: self.generation != gen or self._broken, timeout)
            if self.generation != gen:
                return gen
            if not released:
                self._broken = True
                self._cond.notify_all()
            raise BrokenBarrier("barrier broken while waiting")

    def abort(self) -> None:
        """Break the barrier; current and future waiters raise BrokenBarrier."""
        with self._cond:
            self._broken = True
            self._cond.notify_all()

    @property
    def broken(self) -> bool:
        return self._broken


class Accumulator:
    """Thread-safe fold of contributions with an associative, commutative op."""

    def __init__(self, op: Callable[[Any, Any], Any], identity: Any):
        self._op = op
        self._value = identity
        self._count = 0
        self._lock = threading.Lock()

    def add(self, value) -> None:
        with self._lock:
            self._value = self._op(self._value, value)
            self._count += 1

    @property
    def value(self):
        with self._lock:
            return self._value

    @property
    def count(self) -> int:
        return self._count

    @classmethod
    def sum(cls) -> Accumulator:
        return cls(operator.add, 0)

    @classmethod
    def min(cls) -> Accumulator:
        return cls(min, float("inf"))

    @classmethod
    def max(cls) -> Accumulator:
        return cls(max, float("-inf"))

    @classmethod
    def argmin(cls) -> Accumulator:
        """Min over ``(value, tiebreak, payload)`` triples, ordered by value then tiebreak."""

        def pick(a, b):
            if a is None:
                return b
            return a if (a[0], a[1]) <= (b[0], b[1]) else b

        return cls(pick, None)
