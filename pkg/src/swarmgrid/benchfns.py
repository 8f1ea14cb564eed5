"""Benchmark functions for nonlinear minimization.

Formulas (x in R^D, indices from 1):

* sphere       sum x_i^2
* ackley       -20 exp(-0.2 sqrt(mean x_i^2)) - exp(mean cos(2 pi x_i)) + 20 + e
* rastrigin    10 D + sum (x_i^2 - 10 cos(2 pi x_i))
* rosenbrock   sum_{i<D} 100 (x_{i+1} - x_i^2)^2 + (1 - x_i)^2
* dropwave     -(1 + cos(12 |x|)) / (0.5 |x|^2 + 2)
* schwefel     418.9829 D - sum x_i sin(sqrt|x_i|)
* griewank     1 + sum x_i^2 / 4000 - prod cos(x_i / sqrt i)
* trid         sum (x_i - 1)^2 - sum_{i>1} x_i x_{i-1}
* michalewicz  -sum sin(x_i) sin(i x_i^2 / pi)^20
* weierstrass  sum_i sum_{k=0}^{20} a^k cos(2 pi b^k (x_i + 0.5)) - D sum_k a^k cos(pi b^k),
               a = 0.5, b = 3
* rosenbrock_shifted   rosenbrock(x - o + 1) + bias

All kernels are numba-compiled with ``nogil=True`` so evaluation threads run
in parallel; ``evaluate_rows`` is the batch entry point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit

from swarmgrid.core import ObjectiveFunction, rng_stream
from swarmgrid.errors import DimensionMismatch, UnknownFunction

_JIT = dict(nogil=True, cache=True)

SCHWEFEL_CONST = 418.9829
# 1-D minimizer of -x sin(sqrt|x|) on [-500, 500]
SCHWEFEL_ARGMIN = 420.96874635998194

FN_SPHERE = 0
FN_ACKLEY = 1
FN_RASTRIGIN = 2
FN_ROSENBROCK = 3
FN_DROPWAVE = 4
FN_SCHWEFEL = 5
FN_GRIEWANK = 6
FN_TRID = 7
FN_MICHALEWICZ = 8
FN_WEIERSTRASS = 9
FN_ROSENBROCK_SHIFTED = 10


@njit(**_JIT)
def sphere(x):
    s = 0.0
    for v in x:
        s += v * v
    return s


@njit(**_JIT)
def ackley(x):
    n = x.shape[0]
    s1 = 0.0
    s2 = 0.0
    for v in x:
        s1 += v * v
        s2 += math.cos(2.0 * math.pi * v)
    return -20.0 * math.exp(-0.2 * math.sqrt(s1 / n)) - math.exp(s2 / n) + 20.0 + math.e


@njit(**_JIT)
def rastrigin(x):
    s = 10.0 * x.shape[0]
    for v in x:
        s += v * v - 10.0 * math.cos(2.0 * math.pi * v)
    return s


@njit(**_JIT)
def rosenbrock(x):
    s = 0.0
    for i in range(x.shape[0] - 1):
        a = x[i + 1] - x[i] * x[i]
        b = 1.0 - x[i]
        s += 100.0 * a * a + b * b
    return s


@njit(**_JIT)
def dropwave(x):
    r2 = 0.0
    for v in x:
        r2 += v * v
    return -(1.0 + math.cos(12.0 * math.sqrt(r2))) / (0.5 * r2 + 2.0)


@njit(**_JIT)
def schwefel(x):
    s = 0.0
    for v in x:
        s += v * math.sin(math.sqrt(abs(v)))
    return SCHWEFEL_CONST * x.shape[0] - s


@njit(**_JIT)
def griewank(x):
    s = 0.0
    p = 1.0
    for i in range(x.shape[0]):
        s += x[i] * x[i]
        p *= math.cos(x[i] / math.sqrt(i + 1.0))
    return 1.0 + s / 4000.0 - p


@njit(**_JIT)
def trid(x):
    s = 0.0
    for i in range(x.shape[0]):
        d = x[i] - 1.0
        s += d * d
        if i > 0:
            s -= x[i] * x[i - 1]
    return s


@njit(**_JIT)
def michalewicz(x):
    s = 0.0
    for i in range(x.shape[0]):
        v = x[i]
        s += math.sin(v) * math.sin((i + 1.0) * v * v / math.pi) ** 20
    return -s


@njit(**_JIT)
def _weierstrass_coord(v):
    s = 0.0
    ak = 1.0
    bk = 1.0
    for _ in range(21):
        s += ak * math.cos(2.0 * math.pi * bk * (v + 0.5))
        ak *= 0.5
        bk *= 3.0
    return s


@njit(**_JIT)
def weierstrass(x):
    s = 0.0
    for v in x:
        s += _weierstrass_coord(v)
    return s - x.shape[0] * _weierstrass_coord(0.0)


@njit(**_JIT)
def rosenbrock_shifted(x, shift, bias):
    s = 0.0
    for i in range(x.shape[0] - 1):
        zi = x[i] - shift[i] + 1.0
        zn = x[i + 1] - shift[i + 1] + 1.0
        a = zn - zi * zi
        b = 1.0 - zi
        s += 100.0 * a * a + b * b
    return s + bias


@njit(**_JIT)
def evaluate_kernel(fid, x, shift, bias):
    """Dispatch on function id; usable from other compiled kernels."""
    if fid == FN_SPHERE:
        return sphere(x)
    if fid == FN_ACKLEY:
        return ackley(x)
    if fid == FN_RASTRIGIN:
        return rastrigin(x)
    if fid == FN_ROSENBROCK:
        return rosenbrock(x)
    if fid == FN_DROPWAVE:
        return dropwave(x)
    if fid == FN_SCHWEFEL:
        return schwefel(x)
    if fid == FN_GRIEWANK:
        return griewank(x)
    if fid == FN_TRID:
        return trid(x)
    if fid == FN_MICHALEWICZ:
        return michalewicz(x)
    if fid == FN_WEIERSTRASS:
        return weierstrass(x)
    if fid == FN_ROSENBROCK_SHIFTED:
        return rosenbrock_shifted(x, shift, bias)
    return np.nan


@njit(**_JIT)
def evaluate_rows(fid, X, shift, bias):
    out = np.empty(X.shape[0])
    for r in range(X.shape[0]):
        out[r] = evaluate_kernel(fid, X[r], shift, bias)
    return out


# --------------------------------------------------------------------------
# registry


@dataclass(frozen=True)
class BenchmarkEntry:
    name: str
    fid: int
    box: Callable[[int], tuple[float, float]]
    minimizer: Callable[[int], np.ndarray] | None = None
    minimum: Callable[[int], float] | None = None
    differentiable: bool = True
    min_dim: int = 1


def _trid_minimizer(d):
    i = np.arange(1, d + 1, dtype=np.float64)
    return i * (d + 1 - i)


def _schwefel_minimum(d):
    return d * (SCHWEFEL_CONST - SCHWEFEL_ARGMIN * math.sin(math.sqrt(SCHWEFEL_ARGMIN)))


REGISTRY: dict[str, BenchmarkEntry] = {
    e.name: e
    for e in [
        BenchmarkEntry("sphere", FN_SPHERE, lambda d: (-100.0, 100.0), np.zeros, lambda d: 0.0),
        BenchmarkEntry("ackley", FN_ACKLEY, lambda d: (-32.768, 32.768), np.zeros, lambda d: 0.0),
        BenchmarkEntry("rastrigin", FN_RASTRIGIN, lambda d: (-5.12, 5.12), np.zeros, lambda d: 0.0),
        BenchmarkEntry("rosenbrock", FN_ROSENBROCK, lambda d: (-100.0, 100.0), np.ones, lambda d: 0.0, min_dim=2),
        BenchmarkEntry("dropwave", FN_DROPWAVE, lambda d: (-5.12, 5.12), np.zeros, lambda d: -1.0),
        BenchmarkEntry(
            "schwefel",
            FN_SCHWEFEL,
            lambda d: (-500.0, 500.0),
            lambda d: np.full(d, SCHWEFEL_ARGMIN),
            _schwefel_minimum,
            differentiable=False,
        ),
        BenchmarkEntry("griewank", FN_GRIEWANK, lambda d: (-600.0, 600.0), np.zeros, lambda d: 0.0),
        BenchmarkEntry(
            "trid",
            FN_TRID,
            lambda d: (-float(d * d), float(d * d)),
            _trid_minimizer,
            lambda d: -d * (d + 4) * (d - 1) / 6.0,
            min_dim=2,
        ),
        BenchmarkEntry("michalewicz", FN_MICHALEWICZ, lambda d: (0.0, math.pi)),
        BenchmarkEntry("weierstrass", FN_WEIERSTRASS, lambda d: (-0.5, 0.5), np.zeros, lambda d: 0.0, differentiable=False),
        BenchmarkEntry("rosenbrock_shifted", FN_ROSENBROCK_SHIFTED, lambda d: (-100.0, 100.0), min_dim=2),
    ]
}

# the ten unshifted functions of the comparison suite
SUITE = [
    "ackley",
    "rastrigin",
    "rosenbrock",
    "dropwave",
    "schwefel",
    "griewank",
    "trid",
    "michalewicz",
    "sphere",
    "weierstrass",
]

_NO_SHIFT = np.zeros(1)


@dataclass(frozen=True)
class ShiftSpec:
    shift: np.ndarray
    bias: float = 390.0

    @classmethod
    def random(cls, dim: int, seed: int = 0, bias: float = 390.0, half_width: float = 100.0) -> ShiftSpec:
        """Shift drawn uniformly inside 90% of ``[-half_width, half_width]``."""
        rng = rng_stream(seed, 2008)
        w = 0.9 * half_width
        return cls(rng.uniform(-w, w, dim), bias)


def entry(name: str) -> BenchmarkEntry:
    try:
        return REGISTRY[name]
    except KeyError:
        raise UnknownFunction(f"unknown benchmark function '{name}'") from None


def default_box(name: str, dim: int) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = entry(name).box(dim)
    return np.full(dim, lo), np.full(dim, hi)


def _as_array(x, e: BenchmarkEntry, dim: int | None):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch(f"expected a 1-D argument, got shape {x.shape}")
    if x.shape[0] < e.min_dim:
        raise DimensionMismatch(f"{e.name} needs dimension >= {e.min_dim}")
    if dim is not None and x.shape[0] != dim:
        raise DimensionMismatch(f"{e.name} expects dimension {dim}, got {x.shape[0]}")
    return x


def eval_benchmark(name: str, x) -> float:
    e = entry(name)
    if e.fid == FN_ROSENBROCK_SHIFTED:
        raise UnknownFunction("rosenbrock_shifted needs a ShiftSpec; use shifted_rosenbrock()")
    return float(evaluate_kernel(e.fid, _as_array(x, e, None), _NO_SHIFT, 0.0))


def shifted_rosenbrock(x, spec: ShiftSpec) -> float:
    e = REGISTRY["rosenbrock_shifted"]
    x = _as_array(x, e, spec.shift.shape[0])
    return float(rosenbrock_shifted(x, np.ascontiguousarray(spec.shift, dtype=np.float64), float(spec.bias)))


def make_function(name: str, dim: int | None = None, shift=None, bias: float = 390.0, seed: int = 0) -> ObjectiveFunction:
    """Registry lookup returning an :class:`ObjectiveFunction`.

    ``rosenbrock_shifted`` needs either an explicit ``shift`` vector or a
    ``dim`` (a seeded shift is then drawn).
    """
    e = entry(name)
    if e.fid == FN_ROSENBROCK_SHIFTED:
        if shift is None:
            if dim is None:
                raise DimensionMismatch("rosenbrock_shifted needs dim or shift")
            spec = ShiftSpec.random(dim, seed, bias)
        else:
            spec = ShiftSpec(np.asarray(shift, dtype=np.float64), float(bias))
        shift_arr = np.ascontiguousarray(spec.shift, dtype=np.float64)
        dim = shift_arr.shape[0]
        bias_val = float(spec.bias)
        wire = {"name": name, "shift": [float(v) for v in shift_arr], "bias": bias_val}
    else:
        shift_arr, bias_val = _NO_SHIFT, 0.0
        wire = {"name": name}

    fid = e.fid

    def fn(x, params=None):
        return evaluate_kernel(fid, _as_array(x, e, dim), shift_arr, bias_val)

    def batch(X):
        if X.ndim != 2 or (dim is not None and X.shape[1] != dim):
            raise DimensionMismatch(f"{name}: bad batch shape {X.shape}")
        return evaluate_rows(fid, X, shift_arr, bias_val)

    f = ObjectiveFunction(name, fn, dim=dim, box=lambda d: default_box(name, d), batch=batch, wire=wire)
    f.kernel = (fid, shift_arr, bias_val)
    return f


def from_wire(spec: dict) -> ObjectiveFunction:
    return make_function(spec["name"], shift=spec.get("shift"), bias=spec.get("bias", 390.0))
