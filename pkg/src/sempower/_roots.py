"""Bracketed scalar root finding used by the link and allocation layers."""

from __future__ import annotations

import math
from typing import Callable

from scipy.optimize import brentq

from .errors import BracketError

_EPS = 2.220446049250313e-16


def monotone_root(
    func: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    xtol: float = 1e-300,
    rtol: float = 4 * _EPS,
    maxiter: int = 500,
) -> float:
    """Root of ``func`` on ``[lo, hi]``; endpoints must straddle zero.

    Exact zeros at an endpoint are returned as-is.
    """
    f_lo = func(lo)
    if f_lo == 0.0:
        return lo
    f_hi = func(hi)
    if f_hi == 0.0:
        return hi
    if math.isnan(f_lo) or math.isnan(f_hi) or (f_lo > 0) == (f_hi > 0):
        raise BracketError(
            f"no sign change on [{lo!r}, {hi!r}]: f(lo)={f_lo!r}, f(hi)={f_hi!r}"
        )
    return brentq(func, lo, hi, xtol=xtol, rtol=rtol, maxiter=maxiter)


def bisect_then_refine(
    func: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    ftol: float = 0.0,
    shrink: float = 1e-3,
    maxiter: int = 400,
) -> float:
    """Deterministic bisection followed by Illinois regula falsi.

    Bisection runs until the bracket is ``shrink`` times its initial width,
    then the Illinois variant of false position polishes the root. Iteration
    stops when ``|func(x)| <= ftol`` or the bracket collapses to adjacent
    floats.
    """
    f_lo, f_hi = func(lo), func(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if (f_lo > 0) == (f_hi > 0):
        raise BracketError(
            f"no sign change on [{lo!r}, {hi!r}]: f(lo)={f_lo!r}, f(hi)={f_hi!r}"
        )
    width0 = hi - lo
    it = 0
    while hi - lo > shrink * width0 and it < maxiter:
        mid = 0.5 * (lo + hi)
        f_mid = func(mid)
        if f_mid == 0.0 or abs(f_mid) <= ftol:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
        it += 1

    side = 0
    best_x, best_f = (lo, f_lo) if abs(f_lo) < abs(f_hi) else (hi, f_hi)
    while it < maxiter:
        x = (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
        if not lo < x < hi:
            x = 0.5 * (lo + hi)
            if not lo < x < hi:
                break
        fx = func(x)
        if abs(fx) < abs(best_f):
            best_x, best_f = x, fx
        if fx == 0.0 or abs(fx) <= ftol:
            return x
        if (fx > 0) == (f_lo > 0):
            lo, f_lo = x, fx
            if side == -1:
                f_hi *= 0.5
            side = -1
        else:
            hi, f_hi = x, fx
            if side == 1:
                f_lo *= 0.5
            side = 1
        it += 1
    return best_x
