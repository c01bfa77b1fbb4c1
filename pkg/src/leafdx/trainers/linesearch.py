"""Strong-Wolfe line search with safeguarded cubic interpolation.

Shared by BFGS, the line-search conjugate gradient variants and OSS. Every
returned step satisfies the Armijo condition, so callers only ever move to a
strictly lower loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import Objective


@dataclass
class LineSearchResult:
    alpha: float
    f: float
    g: np.ndarray
    n_evals: int


def _cubic_min(a, fa, da, b, fb, db):
    """Minimizer of the cubic through (a, fa, da) and (b, fb, db), or None."""
    d1 = da + db - 3 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0:
        return None
    d2 = np.copysign(np.sqrt(disc), b - a)
    denom = db - da + 2 * d2
    if denom == 0:
        return None
    x = b - (b - a) * (db + d2 - d1) / denom
    return x if np.isfinite(x) else None


def wolfe_search(obj: Objective, x: np.ndarray, d: np.ndarray, f0: float, g0: np.ndarray,
                 alpha0: float = 1.0, c1: float = 1e-4, c2: float = 0.9,
                 max_evals: int = 40, alpha_max: float = 1e10) -> LineSearchResult | None:
    dphi0 = float(g0 @ d)
    if not dphi0 < 0:
        return None
    evals = 0

    def phi(a):
        nonlocal evals
        evals += 1
        f, g = obj.loss_grad(x + a * d)
        return f, g, float(g @ d)

    def armijo(a, fa):
        return fa <= f0 + c1 * a * dphi0 and fa < f0

    best = None  # lowest Armijo-satisfying point seen, fallback when Wolfe fails

    def note(a, fa, ga):
        nonlocal best
        if armijo(a, fa) and (best is None or fa < best.f):
            best = LineSearchResult(a, fa, ga, evals)

    def zoom(lo, f_lo, d_lo, hi, f_hi, d_hi):
        while evals < max_evals:
            a = _cubic_min(lo, f_lo, d_lo, hi, f_hi, d_hi)
            width = hi - lo
            if a is None or not (min(lo, hi) + 0.1 * abs(width) <= a <= max(lo, hi) - 0.1 * abs(width)):
                a = lo + 0.5 * width
            fa, ga, da = phi(a)
            if not np.isfinite(fa):
                hi, f_hi, d_hi = a, np.inf, 0.0
                continue
            note(a, fa, ga)
            if not armijo(a, fa) or fa >= f_lo:
                hi, f_hi, d_hi = a, fa, da
            else:
                if abs(da) <= -c2 * dphi0:
                    return LineSearchResult(a, fa, ga, evals)
                if da * (hi - lo) >= 0:
                    hi, f_hi, d_hi = lo, f_lo, d_lo
                lo, f_lo, d_lo = a, fa, da
            if abs(hi - lo) < 1e-16 * max(1.0, abs(lo)):
                break
        return best

    a_prev, f_prev, d_prev = 0.0, f0, dphi0
    a = min(alpha0, alpha_max)
    first = True
    while evals < max_evals:
        fa, ga, da = phi(a)
        if not np.isfinite(fa):
            # overshoot into overflow: shrink toward the last good point
            a = a_prev + 0.1 * (a - a_prev)
            continue
        note(a, fa, ga)
        if not armijo(a, fa) or (not first and fa >= f_prev):
            return zoom(a_prev, f_prev, d_prev, a, fa, da)
        if abs(da) <= -c2 * dphi0:
            return LineSearchResult(a, fa, ga, evals)
        if da >= 0:
            return zoom(a, fa, da, a_prev, f_prev, d_prev)
        a_prev, f_prev, d_prev = a, fa, da
        a = min(2.0 * a, alpha_max)
        first = False
    return best
