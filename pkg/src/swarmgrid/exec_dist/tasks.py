"""Named task kinds a worker knows how to run.

A task handler receives ``(payload, ctx)`` where ``ctx`` exposes the
worker-wide state dict and the executing pool thread's private dict.
"""

from __future__ import annotations

import json
import math
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable

from swarmgrid.errors import SwarmGridError


class UnknownTaskKind(SwarmGridError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


@dataclass(frozen=True)
class TaskDescriptor:
    kind: str
    payload: Any = None

    def to_wire(self) -> dict:
        return {"kind": self.kind, "payload": self.payload}

    @classmethod
    def coerce(cls, t) -> dict:
        if isinstance(t, TaskDescriptor):
            return t.to_wire()
        if isinstance(t, dict) and "kind" in t:
            return {"kind": t["kind"], "payload": t.get("payload")}
        if isinstance(t, tuple) and len(t) == 2:
            return {"kind": t[0], "payload": t[1]}
        raise TypeError(f"not a task descriptor: {t!r}")


@dataclass
class TaskContext:
    worker: dict
    thread: dict = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)


Handler = Callable[[Any, TaskContext], Any]
REGISTRY: dict[str, Handler] = {}


def register(name: str):
    def deco(fn: Handler) -> Handler:
        REGISTRY[name] = fn
        return fn

    return deco


def lookup(name: str, registry: dict | None = None) -> Handler:
    reg = REGISTRY if registry is None else registry
    try:
        return reg[name]
    except KeyError:
        raise UnknownTaskKind(f"UnknownTaskKind: {name}") from None


@register("evalfn")
def _evalfn(payload, ctx: TaskContext):
    from swarmgrid.benchfns import from_wire

    key = json.dumps(payload["fn"], sort_keys=True)
    cache = ctx.worker.setdefault("functions", {})
    f = cache.get(key)
    if f is None:
        f = cache[key] = from_wire(payload["fn"])
    params = dict(ctx.worker.get("params", {}))
    params.update(payload.get("params") or {})
    value = f(payload["x"], params)
    return value if math.isfinite(value) else None


@register("initparams")
def _initparams(payload, ctx: TaskContext):
    with ctx.lock:
        ctx.worker.setdefault("params", {}).update(payload or {})
    ctx.thread["params"] = dict(payload or {})
    return True


@register("noop")
def _noop(payload, ctx):
    return payload


@register("fail")
def _fail(payload, ctx):
    raise RuntimeError(str(payload) if payload is not None else "task failed on purpose")


# helpers used by the test-suite and examples


@register("sleep")
def _sleep(payload, ctx):
    time.sleep(float(payload.get("seconds", 0.0)))
    return payload.get("value")


@register("square")
def _square(payload, ctx):
    return payload * payload


@register("failif")
def _failif(payload, ctx):
    """Fail on the worker whose ``tag`` matches, otherwise echo ``value``."""
    if ctx.worker.get("tag") == payload.get("tag"):
        raise RuntimeError(f"failif matched worker tag {payload.get('tag')!r}")
    return payload.get("value")


@register("whoami")
def _whoami(payload, ctx):
    return ctx.worker.get("tag")


@register("countexec")
def _countexec(payload, ctx):
    with ctx.lock:
        ctx.worker["count"] = ctx.worker.get("count", 0) + 1
    ctx.thread["count"] = ctx.thread.get("count", 0) + 1
    return ctx.thread["count"]


@register("setthreaddata")
def _setthreaddata(payload, ctx):
    ctx.thread["data"] = payload
    return True


@register("getthreaddata")
def _getthreaddata(payload, ctx):
    return ctx.thread.get("data")
