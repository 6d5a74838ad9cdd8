"""Reference exit sampler: Euler-Maruyama stepping with Brownian-bridge
boundary-crossing correction.

Plain Euler only sees the grid points, so it misses excursions across a
boundary inside a step and overestimates exit times by O(sqrt(h)).  The
bridge correction removes that leading bias: after proposing
X_{k+1} = X_k + (alpha X_k + beta) h + sigma sqrt(h) Z, the path is also
declared exited through b with probability

    exp( -2 (b - X_k)(b - X_{k+1}) / (sigma(t_k)^2 h) ),

and symmetrically through a.  A proposal already beyond the boundary
makes that probability >= 1, so hard and soft crossings share one rule.

Draw protocol per step (fixed, so runs are reproducible from the
generator state): one standard normal, then, when the bridge correction
is on, one uniform for the upper check and one for the lower check.
Constant-coefficient sets run through a compiled kernel that consumes
the generator stream identically to the interpreted path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coeffs import CoefficientSet
from .errors import DomainError
from .woms import ExitSample

__all__ = ["EulerConfig", "euler_exit", "euler_exit_many"]


@dataclass(frozen=True)
class EulerConfig:
    """Step size, bridge toggle, and the hard time cap of the scheme."""

    h: float = 1e-4
    bridge_correction: bool = True
    t_cap: float = 1e3

    def __post_init__(self):
        if not self.h > 0.0:
            raise DomainError(f"step size h must be > 0, got {self.h}")
        if not self.t_cap > 0.0:
            raise DomainError(f"t_cap must be > 0, got {self.t_cap}")


def _exit_python(cs: CoefficientSet, a: float, b: float, x0: float,
                 t0: float, h: float, t_cap: float, bridge: bool, rng):
    sqrt_h = math.sqrt(h)
    x = x0
    k = 0
    while True:
        t = t0 + k * h
        if t >= t_cap:
            return t_cap, x, True, k
        ak = cs.alpha(t)
        bk = cs.beta(t)
        sk = cs.sigma_at(t)
        z = rng.standard_normal()
        x1 = x + (ak * x + bk) * h + sk * sqrt_h * z
        if bridge:
            u_up = rng.random()
            u_dn = rng.random()
            inv = 1.0 / (sk * sk * h)
            e_up = -2.0 * (b - x) * (b - x1) * inv
            if e_up > -745.0 and u_up < math.exp(e_up if e_up < 0.0 else 0.0):
                return t0 + (k + 1) * h, b, False, k + 1
            e_dn = -2.0 * (x - a) * (x1 - a) * inv
            if e_dn > -745.0 and u_dn < math.exp(e_dn if e_dn < 0.0 else 0.0):
                return t0 + (k + 1) * h, a, False, k + 1
        else:
            if x1 >= b:
                return t0 + (k + 1) * h, b, False, k + 1
            if x1 <= a:
                return t0 + (k + 1) * h, a, False, k + 1
        x = x1
        k += 1


_const_kernel = None


def _get_const_kernel():
    global _const_kernel
    if _const_kernel is None:
        from numba import njit

        @njit(cache=True)
        def kernel(a0, b0, s0, a, b, x0, t0, h, t_cap, bridge, rng):
            sqrt_h = math.sqrt(h)
            inv = 1.0 / (s0 * s0 * h)
            x = x0
            k = 0
            while True:
                t = t0 + k * h
                if t >= t_cap:
                    return t_cap, x, True, k
                z = rng.standard_normal()
                x1 = x + (a0 * x + b0) * h + s0 * sqrt_h * z
                if bridge:
                    u_up = rng.random()
                    u_dn = rng.random()
                    e_up = -2.0 * (b - x) * (b - x1) * inv
                    if e_up > -745.0 and u_up < math.exp(e_up if e_up < 0.0 else 0.0):
                        return t0 + (k + 1) * h, b, False, k + 1
                    e_dn = -2.0 * (x - a) * (x1 - a) * inv
                    if e_dn > -745.0 and u_dn < math.exp(e_dn if e_dn < 0.0 else 0.0):
                        return t0 + (k + 1) * h, a, False, k + 1
                else:
                    if x1 >= b:
                        return t0 + (k + 1) * h, b, False, k + 1
                    if x1 <= a:
                        return t0 + (k + 1) * h, a, False, k + 1
                x = x1
                k += 1

        _const_kernel = kernel
    return _const_kernel


def _exit_one(cs: CoefficientSet, a: float, b: float, x0: float, t0: float,
              cfg: EulerConfig, rng, force_python: bool = False):
    if cs.const_coeffs is not None and not force_python:
        a0, b0, s0 = cs.const_coeffs
        kernel = _get_const_kernel()
        return kernel(a0, b0, s0, a, b, x0, t0, cfg.h, cfg.t_cap,
                      cfg.bridge_correction, rng)
    return _exit_python(cs, a, b, x0, t0, cfg.h, cfg.t_cap,
                        cfg.bridge_correction, rng)


def euler_exit(cs: CoefficientSet, a: float, b: float, x0: float,
               cfg: EulerConfig, rng: np.random.Generator, t0: float = 0.0
               ) -> tuple[float, float, bool]:
    """One Euler exit from [a, b] started at (t0, x0).

    Returns (time, position, censored); the position is snapped to the
    crossed boundary, censored runs report (t_cap, last position, True).
    Deterministic given the generator state.
    """
    if not a < x0 < b:
        raise DomainError(f"x0 = {x0} not inside ({a}, {b})")
    time, pos, censored, _ = _exit_one(cs, a, b, x0, t0, cfg, rng)
    return time, pos, bool(censored)


def _side_of(pos: float, a: float, b: float, censored: bool) -> str | None:
    if censored:
        return None
    return "upper" if pos >= b else "lower"


def euler_exit_many(cs: CoefficientSet, a: float, b: float, x0: float,
                    cfg: EulerConfig, n: int, seed, t0: float = 0.0
                    ) -> list[ExitSample]:
    """n independent Euler exits on replica streams derived from seed.

    Replica i is reproducible in isolation: it consumes exactly the
    stream of child i of numpy's SeedSequence(seed), so the output does
    not depend on execution order.
    """
    if n < 1:
        raise DomainError("euler_exit_many needs n >= 1")
    if not a < x0 < b:
        raise DomainError(f"x0 = {x0} not inside ({a}, {b})")
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    out = []
    for child in root.spawn(n):
        rng = np.random.default_rng(child)
        time, pos, censored, steps = _exit_one(cs, a, b, x0, t0, cfg, rng)
        out.append(ExitSample(time=time, position=pos,
                              side=_side_of(pos, a, b, censored),
                              steps=int(steps), censored=bool(censored)))
    return out
