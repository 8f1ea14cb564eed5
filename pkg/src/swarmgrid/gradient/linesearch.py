"""Line searches: Armijo backtracking and a bracketing/sectioning search.

The bracketing/sectioning search follows the classical Fletcher template.
Parameter mapping:

* ``rho``      sufficient-decrease constant
* ``sigma``    two-sided curvature constant, ``|phi'(a)| <= -sigma phi'(0)``
* ``t1``       bracket expansion factor (next trial <= a_i + t1 (a_i - a_{i-1}))
* ``t2, t3``   sectioning keeps trials inside ``[a + t2 (b-a), b - t3 (b-a)]``
* ``redrate``  bracketing stops early once ``phi(a) <= phi(0) - redrate * last_reduction``
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from swarmgrid.errors import LineSearchFailed


@dataclass(frozen=True)
class LineSearchParams:
    rho: float = 0.1
    beta: float = 0.8
    gamma: float = 1.0
    sigma: float = 0.9
    t1: float = 9.0
    t2: float = 0.1
    t3: float = 0.5
    bracket_reduction: float = 2.0

    def __post_init__(self):
        if not 0 < self.rho < 1 or not 0 < self.beta < 1 or self.gamma <= 0:
            raise ValueError("need 0 < rho < 1, 0 < beta < 1, gamma > 0")
        if not self.rho < self.sigma < 1:
            raise ValueError("need rho < sigma < 1")


def armijo_step(fn, x, d, g, rho=0.1, beta=0.8, gamma=1.0, fx=None, max_backtracks=100):
    """Return ``(t, f(x + t d))`` for the first ``t = gamma beta^m`` with sufficient decrease."""
    x = np.asarray(x, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    slope = float(np.dot(g, d))
    if not slope < 0:
        raise ValueError("direction is not a descent direction (g.d >= 0)")
    if fx is None:
        fx = fn(x)
    t = gamma
    for _ in range(max_backtracks + 1):
        ft = fn(x + t * d)
        if ft <= fx + rho * t * slope:
            return t, ft
        t *= beta
    raise LineSearchFailed(f"Armijo rule not satisfied after {max_backtracks} backtracks")


def _quad_min(a, fa, da, b, fb):
    """Minimizer of the quadratic through (a, fa) with slope da and (b, fb)."""
    z = b - a
    c = (fb - fa - da * z) / (z * z)
    if c <= 0 or not math.isfinite(c):
        return None
    return a - da / (2.0 * c)


def _cubic_min(a, fa, da, b, fb, db):
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0 or not math.isfinite(disc):
        return None
    d2 = math.copysign(math.sqrt(disc), b - a)
    denom = db - da + 2.0 * d2
    if denom == 0:
        return None
    return b - (b - a) * (db + d2 - d1) / denom


def _clip(v, lo, hi):
    lo, hi = min(lo, hi), max(lo, hi)
    if v is None or not math.isfinite(v):
        return hi
    return min(max(v, lo), hi)


def bracket_section_search(phi, dphi, f0, df0, alpha1, p: LineSearchParams, last_reduction=None, max_iter=60):
    """Strong-Wolfe step along a line.

    ``phi(a)`` evaluates the function, ``dphi(a)`` returns ``(slope, gradient)``
    at ``x + a d``.  Returns ``(a, phi(a), gradient or None)``.
    """
    if not df0 < 0:
        raise LineSearchFailed("non-descent direction")
    curv = -p.sigma * df0
    if last_reduction is not None and last_reduction > 0:
        fbar = f0 - p.bracket_reduction * last_reduction
        mu = (fbar - f0) / (p.rho * df0)
    else:
        fbar, mu = -math.inf, math.inf

    a_prev, f_prev, d_prev = 0.0, f0, df0
    a = min(alpha1, mu)
    lo = hi = None
    for _ in range(max_iter):
        fa = phi(a)
        if fa <= fbar:
            return a, fa, None
        if fa > f0 + p.rho * a * df0 or fa >= f_prev:
            lo, hi = (a_prev, f_prev, d_prev), (a, fa, None)
            break
        da, ga = dphi(a)
        if abs(da) <= curv:
            return a, fa, ga
        if da >= 0:
            lo, hi = (a, fa, da), (a_prev, f_prev, d_prev)
            lo = lo + (ga,)
            break
        if mu <= 2 * a - a_prev:
            nxt = mu
        else:
            left, right = 2 * a - a_prev, min(mu, a + p.t1 * (a - a_prev))
            nxt = _clip(_cubic_min(a_prev, f_prev, d_prev, a, fa, da), left, right)
        a_prev, f_prev, d_prev = a, fa, da
        a = nxt
    else:
        raise LineSearchFailed("bracketing phase did not terminate")

    ga_lo = lo[3] if len(lo) > 3 else None
    a_lo, f_lo, d_lo = lo[:3]
    a_hi, f_hi = hi[0], hi[1]
    for _ in range(max_iter):
        width = a_hi - a_lo
        left, right = a_lo + p.t2 * width, a_hi - p.t3 * width
        a = _clip(_quad_min(a_lo, f_lo, d_lo, a_hi, f_hi), left, right)
        if abs(a - a_lo) <= 1e-16 * max(1.0, abs(a_lo)):
            break
        fa = phi(a)
        if fa > f0 + p.rho * a * df0 or fa >= f_lo:
            a_hi, f_hi = a, fa
            continue
        da, ga = dphi(a)
        if abs(da) <= curv:
            return a, fa, ga
        if (a_hi - a_lo) * da >= 0:
            a_hi, f_hi = a_lo, f_lo
        a_lo, f_lo, d_lo, ga_lo = a, fa, da, ga
    if a_lo > 0:
        # best point found still satisfies sufficient decrease
        return a_lo, f_lo, ga_lo
    raise LineSearchFailed("sectioning phase did not find an acceptable step")
