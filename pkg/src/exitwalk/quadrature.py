"""Generic numerical utilities: adaptive integration, monotone inversion,
and interval supremum estimation.

These are deliberately plain scalar routines.  The integrator delegates to
QUADPACK (Gauss-Kronrod) through scipy; inversion and supremum estimation
are self-contained so their behaviour is fully pinned by this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import scipy.integrate

from .errors import DomainError, InversionError, QuadratureError

__all__ = ["Tolerance", "DEFAULT_TOL", "integrate", "sup_abs_on", "invert_monotone"]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Tolerance:
    """Accuracy request for adaptive integration.

    rel/abs are the usual mixed tolerances; max_depth caps the number of
    subintervals the adaptive scheme may create.
    """

    rel: float = 1e-10
    abs: float = 1e-12
    max_depth: int = 200

    def __post_init__(self):
        if not (self.rel > 0.0 and self.abs > 0.0):
            raise DomainError("Tolerance.rel and Tolerance.abs must be positive")
        if self.max_depth < 1:
            raise DomainError("Tolerance.max_depth must be >= 1")


DEFAULT_TOL = Tolerance()


def integrate(f: Callable[[float], float], lo: float, hi: float,
              tol: Tolerance = DEFAULT_TOL) -> float:
    """Integrate f over [lo, hi] with adaptive Gauss-Kronrod quadrature.

    Deterministic for fixed inputs.  Raises QuadratureError (carrying the
    best estimate) if the requested tolerance cannot be certified.
    """
    if not lo <= hi:
        raise DomainError(f"integrate needs lo <= hi, got [{lo}, {hi}]")
    if lo == hi:
        return 0.0
    out = scipy.integrate.quad(f, lo, hi, epsabs=tol.abs, epsrel=tol.rel,
                               limit=tol.max_depth, full_output=1)
    if len(out) >= 4:
        value, abserr = out[0], out[1]
        raise QuadratureError(
            f"quadrature on [{lo}, {hi}] did not converge: {out[3].strip()} "
            f"(achieved abs error ~{abserr:.3g})",
            estimate=value, achieved=abserr)
    return out[0]


def sup_abs_on(f: Callable[[float], float], lo: float, hi: float,
               n_grid: int = 1024) -> float:
    """Upper estimate of sup |f| on [lo, hi].

    Dense-grid scan followed by one golden-section refinement pass around
    the grid argmax.  Never returns less than the grid maximum.
    """
    if not lo <= hi:
        raise DomainError(f"sup_abs_on needs lo <= hi, got [{lo}, {hi}]")
    if lo == hi:
        return abs(f(lo))
    step = (hi - lo) / (n_grid - 1)
    best_val = -1.0
    best_i = 0
    for i in range(n_grid):
        v = abs(f(lo + i * step))
        if v > best_val:
            best_val = v
            best_i = i
    # refine |f| on the bracket spanning the neighbours of the argmax
    a = max(lo, lo + (best_i - 1) * step)
    b = min(hi, lo + (best_i + 1) * step)
    refined = _golden_max(lambda t: abs(f(t)), a, b)
    return max(best_val, refined)


def _golden_max(g: Callable[[float], float], a: float, b: float,
                iters: int = 80) -> float:
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    g1, g2 = g(x1), g(x2)
    for _ in range(iters):
        if b - a <= 1e-14 * max(1.0, abs(a), abs(b)):
            break
        if g1 < g2:
            a, x1, g1 = x1, x2, g2
            x2 = a + _GOLDEN * (b - a)
            g2 = g(x2)
        else:
            b, x2, g2 = x2, x1, g1
            x1 = b - _GOLDEN * (b - a)
            g1 = g(x1)
    return max(g1, g2)


def invert_monotone(f: Callable[[float], float], target: float,
                    lo: float = 0.0,
                    hi_guess: float = 1.0,
                    fprime: Callable[[float], float] | None = None,
                    tol: float = 1e-12,
                    max_expand: int = 200,
                    max_iter: int = 200) -> float:
    """Solve f(t) = target for a nondecreasing f on [lo, inf).

    The upper bracket is found by doubling from hi_guess; the root is then
    narrowed by bisection with a guarded Newton step whenever fprime is
    supplied.  Convergence is on the time argument: |hi - lo| below
    tol * max(1, |t|).
    """
    flo = f(lo)
    if flo > target:
        raise InversionError(f"target {target} below f({lo}) = {flo}")
    if flo == target:
        return lo
    hi = max(hi_guess, lo + tol)
    fhi = f(hi)
    expansions = 0
    while fhi < target:
        expansions += 1
        if expansions > max_expand:
            raise InversionError(
                f"could not bracket target {target}: f plateaus near {fhi} "
                f"after {max_expand} expansions (last t = {hi})")
        lo, flo = hi, fhi
        hi = 2.0 * hi if hi > 0.0 else 1.0
        fhi = f(hi)
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        if hi - lo <= tol * max(1.0, abs(x)):
            break
        use_newton = False
        if fprime is not None:
            d = fprime(x)
            if d > 0.0 and math.isfinite(d):
                step = (f(x) - target) / d
                cand = x - step
                if lo < cand < hi:
                    use_newton = True
                    x_new = cand
        if not use_newton:
            x_new = 0.5 * (lo + hi)
        fx = f(x_new)
        if fx < target:
            lo = x_new
        elif fx > target:
            hi = x_new
        else:
            return x_new
        x = x_new
    return 0.5 * (lo + hi)
