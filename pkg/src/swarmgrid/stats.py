"""Paired nonparametric and parametric tests plus the pairwise winner matrix."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from swarmgrid.errors import AllZeroDiffs, ZeroVariance

EXACT_SIGNED_RANK_MAX_N = 20


def sign_test(wins_a: int, wins_b: int) -> float:
    """Exact two-sided sign test p-value (ties removed beforehand)."""
    n = wins_a + wins_b
    if n < 1:
        raise ValueError("sign test needs at least one non-tied pair")
    k = min(wins_a, wins_b)
    tail = sum(math.comb(n, i) for i in range(k + 1))
    return min(1.0, 2 * tail / 2**n)


def _doubled_ranks(absd: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Average ranks times two (always integers) and tie group sizes."""
    order = np.argsort(absd, kind="stable")
    ranks2 = np.empty(len(absd), dtype=np.int64)
    ties = []
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and absd[order[j + 1]] == absd[order[i]]:
            j += 1
        # ranks i+1 .. j+1 averaged, doubled: (i+1 + j+1)
        ranks2[order[i : j + 1]] = i + j + 2
        ties.append(j - i + 1)
        i = j + 1
    return ranks2, np.array(ties)


def _exact_signed_rank_p(ranks2: np.ndarray, w2: int) -> float:
    # counts[s] = number of sign assignments whose positive doubled-rank sum is s
    total = int(ranks2.sum())
    counts = np.zeros(total + 1, dtype=object)
    counts[0] = 1
    for r in ranks2:
        counts[r:] = counts[r:] + counts[: total + 1 - r].copy()
    lower = int(sum(counts[: w2 + 1]))
    upper = int(sum(counts[w2:]))
    n_assign = 2 ** len(ranks2)
    return min(1.0, 2 * min(lower, upper) / n_assign)


def signed_rank_test(diffs: Sequence[float]) -> float:
    """Two-sided Wilcoxon signed-rank p-value.

    Zero differences are dropped and tied magnitudes get average ranks.  The
    null distribution is exact (over all sign assignments of the actual
    ranks) up to 20 pairs, normal with tie and continuity correction above.
    """
    d = np.asarray(diffs, dtype=np.float64)
    d = d[d != 0]
    n = len(d)
    if n == 0:
        raise AllZeroDiffs("all differences are zero")
    ranks2, ties = _doubled_ranks(np.abs(d))
    w2 = int(ranks2[d > 0].sum())
    if n <= EXACT_SIGNED_RANK_MAX_N:
        return _exact_signed_rank_p(ranks2, w2)
    w = w2 / 2
    mean = n * (n + 1) / 4
    var = n * (n + 1) * (2 * n + 1) / 24 - float(np.sum(ties**3 - ties)) / 48
    if var <= 0:
        return 1.0
    z = max(0.0, abs(w - mean) - 0.5) / math.sqrt(var)
    return min(1.0, math.erfc(z / math.sqrt(2)))


def _betacf(a: float, b: float, x: float, eps=1e-16, max_iter=1000) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_beta(x: float, a: float, b: float) -> float:
    """I_x(a, b)."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_cdf(t: float, df: float) -> float:
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if math.isinf(t):
        return 1.0 if t > 0 else 0.0
    tail = 0.5 * regularized_beta(df / (df + t * t), df / 2.0, 0.5)
    return 1.0 - tail if t > 0 else tail


def student_t_two_sided(t: float, df: float) -> float:
    return min(1.0, regularized_beta(df / (df + t * t), df / 2.0, 0.5))


def paired_t_test(diffs: Sequence[float]) -> float:
    d = np.asarray(diffs, dtype=np.float64)
    n = len(d)
    if n < 2:
        raise ValueError("t-test needs at least two pairs")
    sd = float(np.std(d, ddof=1))
    if sd == 0.0:
        raise ZeroVariance("sample standard deviation is zero")
    t = float(np.mean(d)) * math.sqrt(n) / sd
    return student_t_two_sided(t, n - 1)


# --------------------------------------------------------------------------
# pairwise comparison


@dataclass(frozen=True)
class MethodResult:
    name: str
    values: tuple[float, ...]

    def __init__(self, name: str, values):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "values", tuple(float(v) for v in values))


TIE = "tie"
TEST_ORDER = ("s", "sr", "t")


@dataclass(frozen=True)
class PairwiseCell:
    winner: str
    significant_tests: tuple[str, ...]
    wins_a: float = 0.0
    wins_b: float = 0.0
    p_values: tuple[tuple[str, float], ...] = ()

    def label(self) -> str:
        """``ga[s,sr]`` style rendering."""
        return f"{self.winner}[{','.join(self.significant_tests)}]"


def compare_pair(a: MethodResult, b: MethodResult, alpha: float = 0.05) -> PairwiseCell:
    """Winner by per-function win count (lower mean wins, ties split) plus significant tests."""
    if len(a.values) != len(b.values):
        raise ValueError("methods were run on different function sets")
    va, vb = np.array(a.values), np.array(b.values)
    strict_a = int(np.sum(va < vb))
    strict_b = int(np.sum(vb < va))
    ties = len(va) - strict_a - strict_b
    wins_a, wins_b = strict_a + ties / 2, strict_b + ties / 2
    if wins_a > wins_b:
        winner = a.name
    elif wins_b > wins_a:
        winner = b.name
    else:
        winner = TIE

    p = {}
    if strict_a + strict_b:
        p["s"] = sign_test(strict_a, strict_b)
    diffs = va - vb
    finite = np.isfinite(diffs)
    try:
        p["sr"] = signed_rank_test(np.where(finite, diffs, np.sign(diffs) * np.finfo(float).max))
    except AllZeroDiffs:
        pass
    if finite.all():
        try:
            p["t"] = paired_t_test(diffs)
        except (ZeroVariance, ValueError):
            pass
    tags = tuple(k for k in TEST_ORDER if k in p and p[k] < alpha) if winner != TIE else ()
    return PairwiseCell(winner, tags, wins_a, wins_b, tuple(p.items()))


def pairwise_matrix(results: Sequence[MethodResult], alpha: float = 0.05) -> dict[tuple[str, str], PairwiseCell]:
    """Upper-triangular cells keyed by ``(row method, column method)`` in list order."""
    cells = {}
    for i, a in enumerate(results):
        for b in results[i + 1 :]:
            cells[(a.name, b.name)] = compare_pair(a, b, alpha)
    return cells
