"""Foundational types: vectors, parameter maps, budgets, functions, optimizers.

Everything an optimizer touches at evaluation time lives here: the
:class:`ObjectiveFunction` wrapper, the shared :class:`EvalBudget`, the
:class:`Evaluator` that charges the budget (locally or over the network),
and the :class:`IncumbentChannel` through which cooperating optimizers
share their best solution.
"""

from __future__ import annotations

import math
import threading
from collections.abc import Callable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from swarmgrid.errors import (
    BudgetExhausted,
    ConfigTypeError,
    DimensionMismatch,
    DistributedEvalFailed,
    MissingConfig,
    NonFiniteResult,
    OptimizerBusy,
    ServerFailedReply,
    ConnectionLost,
)

_MISSING = object()


# --------------------------------------------------------------------------
# vectors


def dense_vector(x) -> np.ndarray:
    """Return ``x`` as a read-only, finite, one-dimensional float64 array."""
    arr = np.array(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionMismatch(f"expected a non-empty 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector components must be finite")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class SparseVector:
    dim: int
    indices: tuple[int, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values differ in length")
        prev = -1
        for i, v in zip(self.indices, self.values):
            if not (prev < i < self.dim):
                raise ValueError("indices must be strictly increasing and < dim")
            if v == 0.0 or not math.isfinite(v):
                raise ValueError("sparse entries must be finite and non-zero")
            prev = i

    @classmethod
    def from_dense(cls, x) -> SparseVector:
        arr = np.asarray(x, dtype=np.float64)
        nz = np.flatnonzero(arr)
        return cls(arr.size, tuple(int(i) for i in nz), tuple(float(arr[i]) for i in nz))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[list(self.indices)] = self.values
        return out

    def __len__(self):
        return self.dim


# --------------------------------------------------------------------------
# parameters


def _is_real(v) -> bool:
    return isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, (bool, np.bool_))


class ParamMap(Mapping):
    """String-keyed configuration with typed lookups.

    Values are restricted to int, real, bool, str and real vectors.  A lookup
    with the wrong expected type raises :class:`ConfigTypeError`; integers are
    accepted where a real is expected, nothing else is converted.
    """

    def __init__(self, entries: Mapping[str, Any] | None = None, **kwargs):
        data = dict(entries or {})
        data.update(kwargs)
        for key, value in data.items():
            if not isinstance(key, str):
                raise ConfigTypeError(f"parameter keys must be strings, got {key!r}")
            if isinstance(value, (np.ndarray, list, tuple)):
                if not all(_is_real(v) for v in np.ravel(np.asarray(value, dtype=object))):
                    raise ConfigTypeError(f"{key}: vector entries must be real")
                data[key] = tuple(float(v) for v in np.ravel(value))
            elif not isinstance(value, (bool, str)) and not _is_real(value):
                raise ConfigTypeError(f"{key}: unsupported value type {type(value).__name__}")
        self._data = data

    def __getitem__(self, key):
        return self._data[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self._data)

    def __len__(self):
        return len(self._data)

    def __repr__(self):
        return f"ParamMap({self._data!r})"

    def merged(self, other: Mapping[str, Any]) -> ParamMap:
        data = dict(self._data)
        data.update(other)
        return ParamMap(data)

    def _lookup(self, key, default):
        if key in self._data:
            return self._data[key], True
        if default is _MISSING:
            raise MissingConfig(f"missing required parameter '{key}'")
        return default, False

    def get_int(self, key: str, default=_MISSING) -> int:
        v, found = self._lookup(key, default)
        if not found:
            return v
        if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
            raise ConfigTypeError(f"{key}: expected int, got {type(v).__name__}")
        return int(v)

    def get_real(self, key: str, default=_MISSING) -> float:
        v, found = self._lookup(key, default)
        if not found:
            return v
        if not _is_real(v):
            raise ConfigTypeError(f"{key}: expected real, got {type(v).__name__}")
        return float(v)

    def get_bool(self, key: str, default=_MISSING) -> bool:
        v, found = self._lookup(key, default)
        if found and not isinstance(v, bool):
            raise ConfigTypeError(f"{key}: expected bool, got {type(v).__name__}")
        return v

    def get_str(self, key: str, default=_MISSING) -> str:
        v, found = self._lookup(key, default)
        if found and not isinstance(v, str):
            raise ConfigTypeError(f"{key}: expected str, got {type(v).__name__}")
        return v

    def get_vec(self, key: str, default=_MISSING) -> np.ndarray:
        v, found = self._lookup(key, default)
        if not found:
            return v
        if not isinstance(v, tuple):
            raise ConfigTypeError(f"{key}: expected vector, got {type(v).__name__}")
        return np.array(v, dtype=np.float64)

    def get_real_or_vec(self, key: str, default=_MISSING):
        v, found = self._lookup(key, default)
        if not found:
            return v
        if isinstance(v, tuple):
            return np.array(v, dtype=np.float64)
        return self.get_real(key)


# --------------------------------------------------------------------------
# results and budgets


@dataclass
class OptResult:
    arg: np.ndarray
    value: float
    evals_used: int


class EvalBudget:
    """Thread-safe evaluation counter with an exact cap.

    Reservation happens before evaluation, so concurrent evaluators can never
    overshoot ``limit``.
    """

    def __init__(self, limit: int):
        if limit <= 0:
            raise ValueError("budget limit must be positive")
        self.limit = int(limit)
        self._used = 0
        self._lock = threading.Lock()

    @property
    def used(self) -> int:
        return self._used

    @property
    def remaining(self) -> int:
        return self.limit - self._used

    @property
    def exhausted(self) -> bool:
        return self._used >= self.limit

    def reserve(self, n: int = 1) -> int:
        """Reserve up to ``n`` evaluations; return how many were granted."""
        with self._lock:
            granted = min(n, self.limit - self._used)
            self._used += granted
            return granted

    def charge(self) -> None:
        if self.reserve(1) == 0:
            raise BudgetExhausted(f"evaluation budget of {self.limit} exhausted")


# --------------------------------------------------------------------------
# functions


class ObjectiveFunction:
    """A named, pure real-valued function of a vector and a parameter map.

    ``fn(x, params)`` computes the value.  ``batch`` optionally evaluates the
    rows of a matrix in one call (benchmarks provide a compiled version that
    releases the GIL).  ``wire`` is the payload needed to rebuild the function
    on a remote worker, or None when the function is local-only.
    """

    def __init__(
        self,
        name: str,
        fn: Callable[[np.ndarray, Mapping], float],
        dim: int | None = None,
        box: Callable[[int], tuple[np.ndarray, np.ndarray]] | None = None,
        batch: Callable[[np.ndarray], np.ndarray] | None = None,
        wire: dict | None = None,
    ):
        self.name = name
        self._fn = fn
        self.dim = dim
        self._box = box
        self._batch = batch
        self.wire = wire

    def __call__(self, x, params: Mapping | None = None) -> float:
        return float(self._fn(x, params if params is not None else {}))

    def __repr__(self):
        return f"ObjectiveFunction({self.name!r})"

    @property
    def has_batch(self) -> bool:
        return self._batch is not None

    def batch(self, X: np.ndarray, params: Mapping | None = None) -> np.ndarray:
        if self._batch is not None:
            return self._batch(np.ascontiguousarray(X, dtype=np.float64))
        return np.array([self(row, params) for row in X])

    def default_box(self, dim: int):
        if self._box is None:
            return None
        return self._box(dim)


def function(name: str, fn: Callable[..., float], **kwargs) -> ObjectiveFunction:
    """Wrap a plain ``fn(x)`` or ``fn(x, params)`` callable."""
    try:
        import inspect

        nargs = len(inspect.signature(fn).parameters)
    except (TypeError, ValueError):
        nargs = 2
    wrapped = fn if nargs >= 2 else (lambda x, params: fn(x))
    return ObjectiveFunction(name, wrapped, **kwargs)


def _check_dim(f: ObjectiveFunction, x: np.ndarray):
    if f.dim is not None and x.shape[-1] != f.dim:
        raise DimensionMismatch(f"{f.name} expects dimension {f.dim}, got {x.shape[-1]}")


def evaluate(f: ObjectiveFunction, x, params: Mapping | None = None, budget: EvalBudget | None = None) -> float:
    """Evaluate ``f(x)`` charging one unit of ``budget``."""
    x = dense_vector(x)
    _check_dim(f, x)
    if budget is not None:
        budget.charge()
    value = f(x, params)
    if not math.isfinite(value):
        raise NonFiniteResult(f"{f.name} returned {value}")
    return value


# --------------------------------------------------------------------------
# genotype / phenotype


@dataclass(frozen=True)
class GenotypeCodec:
    to_argument: Callable[[np.ndarray], Any]
    to_genotype: Callable[[Any], np.ndarray]
    identity: bool = False


IDENTITY_CODEC = GenotypeCodec(lambda g: g, lambda a: np.asarray(a, dtype=np.float64), identity=True)

FLOAT32_CODEC = GenotypeCodec(
    lambda g: np.asarray(g, dtype=np.float32),
    lambda a: np.asarray(a, dtype=np.float64),
)


# --------------------------------------------------------------------------
# evaluation front end used by the optimizers


class Evaluator:
    """Budget-charging evaluation of genotypes, locally or through a client.

    ``many`` is the batch path used by population methods: it reserves as many
    evaluations as the budget allows, evaluates those rows and fills the rest
    with ``inf``, setting :attr:`exhausted`.  Non-finite results are mapped to
    ``inf`` (infeasible) rather than raised.
    """

    def __init__(
        self,
        f: ObjectiveFunction,
        params: Mapping | None = None,
        budget: EvalBudget | None = None,
        codec: GenotypeCodec = IDENTITY_CODEC,
        client=None,
    ):
        self.f = f
        self.params = ParamMap(params) if not isinstance(params, ParamMap) else params
        self.budget = budget
        self.codec = codec
        self.client = client
        self.exhausted = False

    def _fn_params(self) -> dict:
        return {k: v for k, v in self.params.items() if k.startswith("fn.")}

    def __call__(self, x) -> float:
        """Single evaluation; raises BudgetExhausted and NonFiniteResult."""
        if self.budget is not None and self.budget.reserve(1) == 0:
            self.exhausted = True
            raise BudgetExhausted("evaluation budget exhausted")
        if self.client is not None:
            value = self._remote(np.atleast_2d(x))[0]
        else:
            value = self.f(self.codec.to_argument(x), self._fn_params())
        if not math.isfinite(value):
            raise NonFiniteResult(f"{self.f.name} returned {value}")
        return value

    def fitness(self, x) -> float:
        try:
            return self(x)
        except NonFiniteResult:
            return math.inf

    def many(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        n = X.shape[0]
        out = np.full(n, np.inf)
        if n == 0:
            return out
        if X.shape[1] and self.f.dim is not None and X.shape[1] != self.f.dim:
            raise DimensionMismatch(f"{self.f.name} expects dimension {self.f.dim}, got {X.shape[1]}")
        granted = n if self.budget is None else self.budget.reserve(n)
        if granted < n:
            self.exhausted = True
        if granted:
            out[:granted] = self.evaluate_reserved(X[:granted])
        return out

    def evaluate_reserved(self, rows: np.ndarray) -> np.ndarray:
        """Evaluate rows whose budget the caller has already reserved."""
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        if rows.shape[0] == 0:
            return np.empty(0)
        if self.client is not None:
            vals = self._remote(rows)
        elif self.codec.identity and self.f.has_batch:
            vals = self.f.batch(rows)
        else:
            fp = self._fn_params()
            vals = np.array([self.f(self.codec.to_argument(r), fp) for r in rows])
        return np.where(np.isfinite(vals), vals, np.inf)

    def _remote(self, rows: np.ndarray) -> np.ndarray:
        if self.f.wire is None:
            raise DistributedEvalFailed(f"{self.f.name} cannot be evaluated remotely")
        fp = self._fn_params()
        tasks = [
            {"kind": "evalfn", "payload": {"fn": self.f.wire, "x": [float(v) for v in r], "params": fp}}
            for r in rows
        ]
        try:
            results = self.client.submit_work(tasks)
        except (ServerFailedReply, ConnectionLost, OSError) as exc:
            raise DistributedEvalFailed(str(exc)) from exc
        return np.array([math.inf if r is None else float(r) for r in results])


# --------------------------------------------------------------------------
# incumbent sharing


class IncumbentChannel:
    """Subject side of the observer pattern for best-so-far solutions.

    Observers are callables or objects with ``notify(channel, arg, value)``.
    Delivery is synchronous on the publishing thread and skips the publishing
    source itself.
    """

    def __init__(self, subject_id: str = ""):
        self.subject_id = subject_id
        self._observers: list = []
        self._best_arg: np.ndarray | None = None
        self._best_value = math.inf
        self._lock = threading.Lock()

    @property
    def best(self):
        with self._lock:
            if self._best_arg is None:
                return None
            return self._best_arg, self._best_value

    @property
    def best_value(self) -> float:
        return self._best_value

    def reset(self):
        with self._lock:
            self._best_arg = None
            self._best_value = math.inf

    def attach(self, observer) -> None:
        with self._lock:
            self._observers.append(observer)
            current = None if self._best_arg is None else (self._best_arg, self._best_value)
        if current is not None:
            self._deliver(observer, *current)

    def detach(self, observer) -> None:
        with self._lock:
            self._observers.remove(observer)

    def publish(self, arg, value: float, source=None) -> bool:
        """Offer a candidate; return True if it became the new incumbent."""
        with self._lock:
            if not value < self._best_value:
                return False
            arg = np.array(arg, dtype=np.float64)
            self._best_arg, self._best_value = arg, float(value)
            targets = [o for o in self._observers if o is not source]
        for obs in targets:
            self._deliver(obs, arg, float(value))
        return True

    def _deliver(self, obs, arg, value):
        if hasattr(obs, "notify"):
            obs.notify(self, arg, value)
        else:
            obs(self, arg, value)


# --------------------------------------------------------------------------
# randomness


def rng_stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``; same inputs, same stream."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *[int(k) for k in key]]))


# --------------------------------------------------------------------------
# optimizer contract


def problem_dim(f: ObjectiveFunction, params: ParamMap) -> int:
    if f.dim is not None:
        return f.dim
    return params.get_int("dim")


def problem_box(f: ObjectiveFunction, params: ParamMap, dim: int, ns: str = ""):
    """Search box as two arrays, from ``<ns>.box.lo/hi``, ``box.lo/hi`` or the function."""
    for prefix in ([f"{ns}."] if ns else []) + [""]:
        lo_key, hi_key = f"{prefix}box.lo", f"{prefix}box.hi"
        if lo_key in params or hi_key in params:
            lo = np.broadcast_to(params.get_real_or_vec(lo_key), (dim,)).astype(np.float64)
            hi = np.broadcast_to(params.get_real_or_vec(hi_key), (dim,)).astype(np.float64)
            if np.any(lo > hi):
                raise ValueError("box lower bound exceeds upper bound")
            return lo, hi
    box = f.default_box(dim)
    if box is None:
        raise MissingConfig(f"missing required parameter '{ns + '.' if ns else ''}box.lo'")
    lo, hi = box
    return np.broadcast_to(lo, (dim,)).astype(np.float64), np.broadcast_to(hi, (dim,)).astype(np.float64)


@dataclass
class RunContext:
    """What one ``minimize`` call works with."""

    f: ObjectiveFunction
    params: ParamMap
    dim: int
    lo: np.ndarray
    hi: np.ndarray
    evaluator: Evaluator
    channel: IncumbentChannel
    seed: int
    source: Any = None
    extras: dict = field(default_factory=dict)

    @property
    def budget(self) -> EvalBudget:
        return self.evaluator.budget

    def publish(self, arg, value) -> bool:
        if not math.isfinite(value):
            return False
        return self.channel.publish(arg, value, source=self.source)


class Optimizer:
    """Base class for every optimizer.

    Subclasses set :attr:`namespace` (the parameter-key prefix) and implement
    ``_run(ctx)``, publishing every improvement through ``ctx.publish``.  The
    result is whatever the incumbent channel holds when ``_run`` returns, so
    budget exhaustion simply ends the run.
    """

    namespace = ""
    required: tuple[str, ...] = ()

    def __init__(self, params: Mapping | None = None, *, codec: GenotypeCodec = IDENTITY_CODEC, client=None):
        self._params = ParamMap(params or {})
        self._state_lock = threading.Lock()
        self._running = False
        self.codec = codec
        self.client = client
        self.channel = IncumbentChannel(type(self).__name__)

    @property
    def params(self) -> ParamMap:
        return self._params

    def set_params(self, params: Mapping) -> None:
        with self._state_lock:
            if self._running:
                raise OptimizerBusy("set_params called while minimize() is running")
            self._params = params if isinstance(params, ParamMap) else ParamMap(params)

    def minimize(self, f: ObjectiveFunction, budget: EvalBudget | None = None) -> OptResult:
        with self._state_lock:
            if self._running:
                raise OptimizerBusy("minimize() already running on this instance")
            self._running = True
            params = self._params
        try:
            for key in self.required:
                if key not in params:
                    raise MissingConfig(f"missing required parameter '{key}'")
            ctx = self._context(f, params, budget)
            try:
                self._run(ctx)
            except BudgetExhausted:
                pass
            best = self.channel.best
            if best is None:
                raise BudgetExhausted("no evaluation could be performed within the budget")
            return OptResult(best[0], best[1], ctx.budget.used)
        finally:
            with self._state_lock:
                self._running = False

    def _context(self, f, params: ParamMap, budget: EvalBudget | None) -> RunContext:
        dim = problem_dim(f, params)
        lo, hi = problem_box(f, params, dim, self.namespace)
        if budget is None:
            budget = EvalBudget(params.get_int("budget", 1000 * dim))
        self.channel.reset()
        evaluator = Evaluator(f, params, budget, codec=self.codec, client=self.client)
        return RunContext(f, params, dim, lo, hi, evaluator, self.channel, params.get_int("seed", 0), source=self)

    def _run(self, ctx: RunContext) -> None:
        raise NotImplementedError

    def key(self, name: str) -> str:
        return f"{self.namespace}.{name}" if self.namespace else name


def require_keys(params: ParamMap, keys: Sequence[str]) -> None:
    for key in keys:
        if key not in params:
            raise MissingConfig(f"missing required parameter '{key}'")
