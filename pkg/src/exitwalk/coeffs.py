"""Coefficients of linear time-inhomogeneous diffusions and their derived
scalar maps.

A coefficient set describes the SDE

    dX_t = (alpha(t) X_t + beta(t)) dt + sigma(t) dW_t

through three callables of time.  Everything the walk engine needs is
derived from them:

    theta(t)   = -int_0^t alpha(s) ds
    rho(t)     =  int_0^t sigma(s)^2 exp(2 theta(s)) ds     (time change)
    c(t)       =  exp(-theta(t)) int_0^t beta(s) exp(theta(s)) ds
    E[X_t]     =  x0 exp(-theta(t)) + c(t)

rho is strictly increasing (sigma is bounded below by sigma_floor > 0),
so its inverse is well defined on the range of rho.  Closed forms may be
installed per coefficient set; otherwise adaptive quadrature and monotone
inversion are used.  Quadrature values are memoised by exact argument so
repeated evaluation is cheap and history-independent (safe to share a set
across concurrently running walks).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from . import quadrature
from .errors import CoefficientError, DomainError, InversionError

__all__ = [
    "CoefficientSet", "theta", "rho", "rho_inv", "c_func", "mean_exact",
    "rho_prime", "theta_quadrature", "rho_quadrature", "c_quadrature",
    "evaluators", "brownian_preset", "constant_preset", "ou_preset",
    "sinusoidal_preset", "sinusoidal_boundary", "sinusoidal_m",
    "PRESET_NAMES",
]

_CACHE_MAX = 8192
INV_SQRT_E = 1.0 / math.sqrt(math.e)


@dataclass(frozen=True)
class CoefficientSet:
    """Immutable triple (alpha, beta, sigma) with optional closed forms.

    sigma must satisfy sigma(t) >= sigma_floor > 0 for every queried t;
    violations raise at evaluation time.  The optional delta_m_closed
    callable, signature (t0, x0, a, b, m), overrides the quadrature route
    of the spheroid-margin bound; const_coeffs marks the set as having
    constant (a0, b0, s0) coefficients, which unlocks compiled fast paths.
    """

    alpha: Callable[[float], float]
    beta: Callable[[float], float]
    sigma: Callable[[float], float]
    sigma_floor: float
    theta_closed: Callable[[float], float] | None = None
    rho_closed: Callable[[float], float] | None = None
    rho_inv_closed: Callable[[float], float] | None = None
    c_closed: Callable[[float], float] | None = None
    delta_m_closed: Callable[[float, float, float, float, float], float] | None = None
    const_coeffs: tuple[float, float, float] | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not (self.sigma_floor > 0.0):
            raise CoefficientError(f"sigma_floor must be > 0, got {self.sigma_floor}")
        self.sigma_at(0.0)
        if self.rho_closed is not None and self.rho_closed(0.0) != 0.0:
            raise CoefficientError("rho_closed(0) must be 0")

    def sigma_at(self, t: float) -> float:
        v = self.sigma(t)
        if not v >= self.sigma_floor:
            raise CoefficientError(
                f"sigma({t}) = {v} below the declared floor {self.sigma_floor}")
        return v


def _memoised(cs: CoefficientSet, tag: str, t: float, compute) -> float:
    # values never depend on cache history, so concurrent access is safe;
    # eviction races at worst drop an entry twice
    key = (tag, t)
    cache = cs._cache
    v = cache.get(key)
    if v is None:
        v = compute(t)
        if len(cache) >= _CACHE_MAX:
            try:
                cache.pop(next(iter(cache)))
            except (KeyError, StopIteration):
                pass
        cache[key] = v
    return v


# -- quadrature routes (always available, ignore the closed forms) ----------

def theta_quadrature(cs: CoefficientSet, t: float) -> float:
    """theta(t) = -int_0^t alpha, by adaptive quadrature."""
    return -quadrature.integrate(cs.alpha, 0.0, t)


def rho_quadrature(cs: CoefficientSet, t: float) -> float:
    """rho(t) = int_0^t sigma^2 exp(2 theta), by adaptive quadrature.

    theta inside the integrand honours a closed form when one exists.
    """
    th = cs.theta_closed or (lambda s: _memoised(cs, "theta", s, lambda u: theta_quadrature(cs, u)))
    return quadrature.integrate(
        lambda s: cs.sigma_at(s) ** 2 * math.exp(2.0 * th(s)), 0.0, t)


def c_quadrature(cs: CoefficientSet, t: float) -> float:
    """c(t) = exp(-theta(t)) int_0^t beta exp(theta), by adaptive quadrature."""
    th = cs.theta_closed or (lambda s: _memoised(cs, "theta", s, lambda u: theta_quadrature(cs, u)))
    inner = quadrature.integrate(lambda s: cs.beta(s) * math.exp(th(s)), 0.0, t)
    return math.exp(-th(t)) * inner


# -- dispatching evaluators --------------------------------------------------

def evaluators(cs: CoefficientSet):
    """Resolve (theta, rho, rho_inv, c) once, honouring closed forms.

    Returns plain callables; the quadrature fallbacks memoise by exact
    argument on the coefficient set's internal cache.
    """
    th = cs.theta_closed or (lambda t: _memoised(cs, "theta", t, lambda u: theta_quadrature(cs, u)))
    rh = cs.rho_closed or (lambda t: _memoised(cs, "rho", t, lambda u: rho_quadrature(cs, u)))
    cf = cs.c_closed or (lambda t: _memoised(cs, "c", t, lambda u: c_quadrature(cs, u)))
    if cs.rho_inv_closed is not None:
        ri = cs.rho_inv_closed
    else:
        def ri(u, _rh=rh):
            return quadrature.invert_monotone(
                _rh, u, lo=0.0, hi_guess=1.0,
                fprime=lambda s: rho_prime(cs, s), tol=1e-12)
    return th, rh, ri, cf


# -- public scalar operations ------------------------------------------------

def theta(cs: CoefficientSet, t: float) -> float:
    """Drift integral theta(t) = -int_0^t alpha(s) ds, t >= 0."""
    if t < 0.0:
        raise DomainError(f"theta requires t >= 0, got {t}")
    if cs.theta_closed is not None:
        return cs.theta_closed(t)
    return _memoised(cs, "theta", t, lambda u: theta_quadrature(cs, u))


def rho(cs: CoefficientSet, t: float) -> float:
    """Time change rho(t) = int_0^t sigma^2 exp(2 theta); rho(0) = 0."""
    if t < 0.0:
        raise DomainError(f"rho requires t >= 0, got {t}")
    if cs.rho_closed is not None:
        return cs.rho_closed(t)
    return _memoised(cs, "rho", t, lambda u: rho_quadrature(cs, u))


def rho_prime(cs: CoefficientSet, t: float) -> float:
    """rho'(t) = sigma(t)^2 exp(2 theta(t)); strictly positive."""
    return cs.sigma_at(t) ** 2 * math.exp(2.0 * theta(cs, t))


def rho_inv(cs: CoefficientSet, u: float) -> float:
    """Inverse time change: the t >= 0 with rho(t) = u."""
    if u < 0.0:
        raise DomainError(f"rho_inv requires u >= 0, got {u}")
    if u == 0.0:
        return 0.0
    if cs.rho_inv_closed is not None:
        return cs.rho_inv_closed(u)
    return quadrature.invert_monotone(
        lambda t: rho(cs, t), u, lo=0.0, hi_guess=1.0,
        fprime=lambda t: rho_prime(cs, t), tol=1e-12)


def c_func(cs: CoefficientSet, t: float) -> float:
    """Affine drift response c(t) = exp(-theta(t)) int_0^t beta exp(theta)."""
    if t < 0.0:
        raise DomainError(f"c_func requires t >= 0, got {t}")
    if cs.c_closed is not None:
        return cs.c_closed(t)
    return _memoised(cs, "c", t, lambda u: c_quadrature(cs, u))


def mean_exact(cs: CoefficientSet, x0: float, t: float) -> float:
    """Unconditional mean of the unstopped diffusion at time t."""
    return x0 * math.exp(-theta(cs, t)) + c_func(cs, t)


# -- presets -------------------------------------------------------------------

def brownian_preset() -> CoefficientSet:
    """Standard Brownian motion: alpha = beta = 0, sigma = 1."""
    return CoefficientSet(
        alpha=lambda t: 0.0,
        beta=lambda t: 0.0,
        sigma=lambda t: 1.0,
        sigma_floor=1.0,
        theta_closed=lambda t: 0.0,
        rho_closed=lambda t: t,
        rho_inv_closed=lambda u: u,
        c_closed=lambda t: 0.0,
        delta_m_closed=lambda t0, x0, a, b, m: INV_SQRT_E,
        const_coeffs=(0.0, 0.0, 1.0),
    )


def constant_preset(alpha0: float, beta0: float, sigma0: float) -> CoefficientSet:
    """Constant coefficients with fully closed-form derived maps."""
    if not sigma0 > 0.0:
        raise CoefficientError(f"sigma0 must be > 0, got {sigma0}")
    a0, b0, s0 = float(alpha0), float(beta0), float(sigma0)
    if a0 == 0.0:
        rho_c = lambda t: s0 * s0 * t
        rho_i = lambda u: u / (s0 * s0)
        c_c = lambda t: b0 * t
    else:
        def rho_c(t):
            return s0 * s0 * (1.0 - math.exp(-2.0 * a0 * t)) / (2.0 * a0)

        def rho_i(u):
            arg = 1.0 - 2.0 * a0 * u / (s0 * s0)
            if arg <= 0.0:
                raise InversionError(
                    f"rho_inv: {u} beyond the range of rho (saturates at "
                    f"{s0 * s0 / (2.0 * a0)})")
            return -math.log(arg) / (2.0 * a0)

        c_c = lambda t: b0 * (math.exp(a0 * t) - 1.0) / a0

    def dm(t0, x0, a, b, m):
        return (math.exp(a0 * t0) * math.exp(abs(a0) * m)
                * (INV_SQRT_E + math.sqrt(m) * abs(b0 + x0 * a0) / s0))

    return CoefficientSet(
        alpha=lambda t: a0,
        beta=lambda t: b0,
        sigma=lambda t: s0,
        sigma_floor=s0,
        theta_closed=lambda t: -a0 * t,
        rho_closed=rho_c,
        rho_inv_closed=rho_i,
        c_closed=c_c,
        delta_m_closed=dm,
        const_coeffs=(a0, b0, s0),
    )


def ou_preset(k: float, mu: float, sigma0: float) -> CoefficientSet:
    """Mean-reverting preset: alpha = -k, beta = k*mu, sigma = sigma0."""
    return constant_preset(-k, k * mu, sigma0)


def sinusoidal_preset() -> CoefficientSet:
    """The oscillating benchmark: alpha = cos/(2+sin), beta = cos,
    sigma = 2+sin.

    alpha equals sigma'/sigma here, which collapses the time change to
    rho(t) = 4t and yields closed forms for everything else:
    theta(t) = -log((2+sin t)/2), c(t) = (2+sin t) log((2+sin t)/2).
    The margin bound installed is the coarse interval-wide one,
    (3/2) (1/sqrt(e) + (1+max(|a|,|b|)) sqrt(m)), independent of (t0, x0).
    """
    def dm(t0, x0, a, b, m):
        return 1.5 * (INV_SQRT_E + (1.0 + max(abs(a), abs(b))) * math.sqrt(m))

    return CoefficientSet(
        alpha=lambda t: math.cos(t) / (2.0 + math.sin(t)),
        beta=math.cos,
        sigma=lambda t: 2.0 + math.sin(t),
        sigma_floor=1.0,
        theta_closed=lambda t: -math.log((2.0 + math.sin(t)) / 2.0),
        rho_closed=lambda t: 4.0 * t,
        rho_inv_closed=lambda u: u / 4.0,
        c_closed=lambda t: (2.0 + math.sin(t)) * math.log((2.0 + math.sin(t)) / 2.0),
        delta_m_closed=dm,
    )


def sinusoidal_boundary(t: float, t0: float, x0: float, d: float
                        ) -> tuple[float, float]:
    """Closed-form generalised spheroid boundary for the sinusoidal preset.

    (lower, upper) at relative time t from (t0, x0):

        (2+sin(t+t0))/2 * ( psi_pm(4t) + 2 log((2+sin(t+t0))/(2+sin t0)) )
        + (2+sin(t+t0))/(2+sin t0) * x0

    with psi_pm the Brownian boundary at scale d.  Used to cross-check
    the generic boundary construction.
    """
    from .brownian import _psi_upper_raw

    s_t = 2.0 + math.sin(t + t0)
    s_0 = 2.0 + math.sin(t0)
    w = _psi_upper_raw(d, 4.0 * t)
    shift = 2.0 * math.log(s_t / s_0)
    carry = (s_t / s_0) * x0
    return (0.5 * s_t * (-w + shift) + carry,
            0.5 * s_t * (w + shift) + carry)


def sinusoidal_m(a: float, b: float) -> float:
    """Horizon step for the sinusoidal preset that saturates the scale caps.

    Solves 2 Delta_m sqrt(m) = b - a for the coarse margin bound of
    sinusoidal_preset, so the time-budget constraint never binds before
    the side constraints anywhere in [a, b].
    """
    if not a < b:
        raise DomainError(f"sinusoidal_m needs a < b, got [{a}, {b}]")
    big = 1.0 + max(abs(a), abs(b))
    root = math.sqrt(1.0 / math.e + (4.0 / 3.0) * (b - a) * big)
    return ((root - INV_SQRT_E) / (2.0 * big)) ** 2


PRESET_NAMES = ("bm", "constant", "ou", "sinusoidal", "growth")
