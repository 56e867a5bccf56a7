"""Scalar numerical kernels: root bracketing, 1-d extrema, quadrature.

These are deliberately simple, derivative-free routines.  The functions
they are applied to (growth laws, ratio functions) are cheap to evaluate
and may be non-smooth (piecewise-linear family), so robustness beats
order of convergence everywhere in this package.
"""

from __future__ import annotations

import math
from typing import Callable

from .errors import AssumptionViolation, NumericError

__all__ = [
    "bisect_root",
    "golden_section_min",
    "grid_extremum",
    "adaptive_simpson",
]

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0


def bisect_root(
    f: Callable[[float], float],
    a: float,
    b: float,
    xtol: float = 1e-13,
    max_iter: int = 200,
) -> float:
    """Root of f in [a, b] by bisection; f(a) and f(b) must differ in sign.

    Runs until the bracket is narrower than max(xtol, a few ulp) and
    returns the midpoint.  Zero endpoint values are accepted as roots.
    """
    fa = f(a)
    fb = f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if (fa > 0) == (fb > 0):
        raise NumericError(f"no sign change on [{a}, {b}]: f(a)={fa}, f(b)={fb}")
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        if b - a <= max(xtol, 4.0 * math.ulp(max(abs(a), abs(b)))):
            return mid
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (fb > 0):
            b, fb = mid, fm
        else:
            a, fa = mid, fm
    return 0.5 * (a + b)


def golden_section_min(
    f: Callable[[float], float],
    a: float,
    b: float,
    xtol: float = 1e-10,
) -> tuple[float, float]:
    """Minimizer and minimum of f on [a, b] by golden-section search.

    Handles minima at the interval edges (the search simply collapses
    onto the edge).  Requires unimodality on [a, b] for a guarantee, but
    callers always pass a bracket localized by a prior grid scan.
    """
    if b < a:
        a, b = b, a
    h = b - a
    if h <= xtol:
        x = 0.5 * (a + b)
        return x, f(x)
    c = a + _INV_PHI2 * h
    d = a + _INV_PHI * h
    yc = f(c)
    yd = f(d)
    n = int(math.ceil(math.log(xtol / h) / math.log(_INV_PHI)))
    for _ in range(n):
        if yc < yd:
            b, d, yd = d, c, yc
            h *= _INV_PHI
            c = a + _INV_PHI2 * h
            yc = f(c)
        else:
            a, c, yc = c, d, yd
            h *= _INV_PHI
            d = a + _INV_PHI * h
            yd = f(d)
    if yc < yd:
        return c, yc
    return d, yd


def grid_extremum(
    f: Callable[[float], float],
    a: float,
    b: float,
    mode: str,
    grid_n: int = 4096,
    xtol: float = 1e-10,
) -> tuple[float, float]:
    """Extremum of f on [a, b]: dense grid scan + golden-section refinement.

    mode is "min" or "max".  The grid localizes the best cell, and the
    refinement runs on the two cells around it, so edge extrema are found
    as well as interior ones.  Non-finite values anywhere on the grid are
    an assumption violation (callers scan pole-free intervals).
    """
    if mode not in ("min", "max"):
        raise ValueError(f"mode must be 'min' or 'max', got {mode!r}")
    if grid_n < 3:
        raise ValueError("grid_n must be >= 3")
    if b <= a:
        raise ValueError(f"empty interval [{a}, {b}]")
    sign = 1.0 if mode == "min" else -1.0

    def g(x: float) -> float:
        v = sign * f(x)
        if not math.isfinite(v):
            raise AssumptionViolation(f"non-finite value {v} at S = {x} during scan")
        return v

    step = (b - a) / (grid_n - 1)
    best_k, best_v = 0, g(a)
    for k in range(1, grid_n):
        x = a + k * step if k < grid_n - 1 else b
        v = g(x)
        if v < best_v:
            best_k, best_v = k, v
    lo = a + max(best_k - 1, 0) * step
    hi = min(a + (best_k + 1) * step, b)
    x_star, v_star = golden_section_min(g, lo, hi, xtol)
    if best_v < v_star:
        x_star, v_star = a + best_k * step if best_k < grid_n - 1 else b, best_v
    return x_star, sign * v_star


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    atol: float = 1e-10,
    rtol: float = 1e-10,
    max_depth: int = 60,
) -> tuple[float, float]:
    """Integral of f over [a, b] with an error estimate.

    Interval-halving Simpson rule: each interval compares the one-panel
    value against the two-panel value; the pair difference /15 is the
    local error, accepted when below atol + rtol*|local integral| and
    cancelled by Richardson extrapolation.  Orientation follows the sign
    of (b - a).
    """
    if a == b:
        return 0.0, 0.0
    if b < a:
        val, err = adaptive_simpson(f, b, a, atol, rtol, max_depth)
        return -val, err

    def simpson(fa: float, fm: float, fb: float, h: float) -> float:
        return h / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, m, b, fa, fm, fb, whole, tol, depth):
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm = f(lm)
        frm = f(rm)
        left = simpson(fa, flm, fm, m - a)
        right = simpson(fm, frm, fb, b - m)
        delta = left + right - whole
        if abs(delta) <= 15.0 * max(tol, atol) or depth >= max_depth:
            if depth >= max_depth and abs(delta) > 15.0 * max(tol, atol):
                raise NumericError(
                    f"quadrature failed to converge on [{a}, {b}] "
                    f"(residual {abs(delta):.3g})"
                )
            return left + right + delta / 15.0, abs(delta) / 15.0
        lv, le = recurse(a, lm, m, fa, flm, fm, left, tol / 2.0, depth + 1)
        rv, re = recurse(m, rm, b, fm, frm, fb, right, tol / 2.0, depth + 1)
        return lv + rv, le + re

    m = 0.5 * (a + b)
    fa, fm, fb = f(a), f(m), f(b)
    whole = simpson(fa, fm, fb, b - a)
    tol = atol + rtol * abs(whole)
    return recurse(a, m, b, fa, fm, fb, whole, tol, 0)
