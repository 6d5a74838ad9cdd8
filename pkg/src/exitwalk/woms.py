"""Walk on moving spheroids for linear time-inhomogeneous diffusions.

The diffusion dX = (alpha(t) X + beta(t)) dt + sigma(t) dW started at
(t0, x0) is a deterministic affine image of a time-changed Brownian
motion, so the exact Brownian spheroid exit law transfers to a family of
generalised spheroids whose boundaries anchored at (t0, x0) are

    psi_pm^L(t) = exp(-theta(t+t0)) psi_pm(rho(t+t0) - rho(t0))
                  + c(t+t0) + (x0 - c(t0)) exp(theta(t0) - theta(t+t0)),

with the Brownian boundary psi_pm evaluated at the elapsed Brownian time
and with support [0, rho^-1(d^2 + rho(t0)) - t0].  Each walk step draws an
exact Brownian exit (tau, side) at scale d, converts the time through the
inverse time change, and lands the state on the matching boundary branch.
The scale d is the largest one keeping the spheroid inside the interval
shrunk toward the current position:

    d = min( (b_gx - x)/Delta_m, (x - a_gx)/Delta_m,
             sqrt(rho(t0+m) - rho(t0)) ),

where Delta_m bounds the spheroid's spatial extent per unit scale over a
horizon of length m.  The walk halts once the position enters one of the
eps-shells [a, a+eps] or [b-eps, b].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import coeffs as cf_mod
from . import quadrature
from .brownian import _psi_upper_raw, _sample_exit_raw
from .coeffs import INV_SQRT_E, CoefficientSet
from .errors import DomainError, StepLimitError

__all__ = ["ExitProblem", "WalkSkeleton", "ExitSample", "Diagnostics",
           "shrunken_bounds", "delta_m", "spheroid_scale", "psi_l",
           "step", "run", "run_capped", "validate",
           "DEFAULT_EPS", "DEFAULT_GAMMA", "DEFAULT_M", "MAX_STEPS_DEFAULT"]

DEFAULT_EPS = 1e-2
DEFAULT_GAMMA = 1e-4
DEFAULT_M = 1.0
MAX_STEPS_DEFAULT = 10_000_000

# keeps rho^-1(tau + rho(T)) strictly inside the spheroid support under rounding
_SCALE_SHRINK = 1.0 - 1e-12


@dataclass(frozen=True)
class ExitProblem:
    """Interval exit problem for one coefficient set.

    eps is the stopping-shell width, gamma_shell the per-step interval
    shrink factor, m the horizon step bounding each spheroid's time span.
    """

    cs: CoefficientSet
    a: float
    b: float
    x0: float
    t0: float = 0.0
    eps: float = DEFAULT_EPS
    gamma_shell: float = DEFAULT_GAMMA
    m: float = DEFAULT_M

    def __post_init__(self):
        if not self.a < self.b:
            raise DomainError(f"need a < b, got [{self.a}, {self.b}]")
        if not (self.eps > 0.0 and self.a + self.eps < self.b - self.eps):
            raise DomainError(
                f"shell width eps = {self.eps} must satisfy a+eps < b-eps on "
                f"[{self.a}, {self.b}]")
        if not self.a < self.x0 < self.b:
            raise DomainError(f"x0 = {self.x0} not inside ({self.a}, {self.b})")
        if not 0.0 < self.gamma_shell < 1.0:
            raise DomainError(f"gamma_shell must lie in (0,1), got {self.gamma_shell}")
        if not self.m > 0.0:
            raise DomainError(f"horizon step m must be > 0, got {self.m}")
        if not self.t0 >= 0.0:
            raise DomainError(f"t0 must be >= 0, got {self.t0}")


@dataclass
class WalkSkeleton:
    """Successive (T_n, X_n) nodes of one walk plus the scales d_n used."""

    nodes: list[tuple[float, float]] = field(default_factory=list)
    d_used: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class ExitSample:
    """Outcome of one walk: approximated exit time, position and side.

    side is None when the run was censored at a time cap before reaching
    a shell.
    """

    time: float
    position: float
    side: str | None
    steps: int
    censored: bool = False


@dataclass(frozen=True)
class Diagnostics:
    """Finite-horizon coefficient summary from validate()."""

    horizon: float
    min_sigma: float
    max_abs_alpha: float
    max_abs_beta: float
    sigma_floor: float
    warnings: tuple[str, ...]


def shrunken_bounds(p: ExitProblem, x: float) -> tuple[float, float]:
    """Interval shrunk toward x: (a + g(x-a), b - g(b-x)) with g = gamma_shell."""
    g = p.gamma_shell
    return (p.a + g * (x - p.a), p.b - g * (p.b - x))


def delta_m(p: ExitProblem, t0: float, x0: float) -> float:
    """Spatial extent of a unit-scale spheroid over the horizon [t0, t0+m].

    Closed form when the coefficient set installs one, otherwise

        exp(-theta(t0)) exp(int |alpha|)
            (1/sqrt(e) + sqrt(int ((beta + x0 alpha)/sigma)^2)),

    both integrals over [t0, t0+m].
    """
    cs = p.cs
    if cs.delta_m_closed is not None:
        return cs.delta_m_closed(t0, x0, p.a, p.b, p.m)
    abs_alpha = quadrature.integrate(lambda s: abs(cs.alpha(s)), t0, t0 + p.m)
    ratio_sq = quadrature.integrate(
        lambda s: ((cs.beta(s) + x0 * cs.alpha(s)) / cs.sigma_at(s)) ** 2,
        t0, t0 + p.m)
    return (math.exp(-cf_mod.theta(cs, t0)) * math.exp(abs_alpha)
            * (INV_SQRT_E + math.sqrt(ratio_sq)))


def _scale(p: ExitProblem, rho_t0: float, rho_t0m: float, dm: float,
           x0: float) -> float:
    g = p.gamma_shell
    a_gx = p.a + g * (x0 - p.a)
    b_gx = p.b - g * (p.b - x0)
    d = min((b_gx - x0) / dm, (x0 - a_gx) / dm, math.sqrt(rho_t0m - rho_t0))
    return d * _SCALE_SHRINK


def spheroid_scale(p: ExitProblem, t0: float, x0: float) -> float:
    """Largest admissible spheroid scale at (t0, x0).

    Minimum of the two side margins divided by delta_m and of the root of
    the time-change increment over the horizon; shrunk by 1 - 1e-12 so
    the converted exit time stays strictly inside the support.
    """
    if not p.a < x0 < p.b:
        raise DomainError(f"spheroid_scale: x0 = {x0} outside ({p.a}, {p.b})")
    _, rh, _, _ = cf_mod.evaluators(p.cs)
    return _scale(p, rh(t0), rh(t0 + p.m), delta_m(p, t0, x0), x0)


def _affine_parts(th, cfun, t_abs: float, t0: float, x0: float,
                  th_t0: float, c_t0: float) -> tuple[float, float]:
    # X = A * w + B maps Brownian displacement w to diffusion position
    th_t = th(t_abs)
    scale = math.exp(-th_t)
    offset = cfun(t_abs) + (x0 - c_t0) * math.exp(th_t0 - th_t)
    return scale, offset


def psi_l(p: ExitProblem, t: float, t0: float, x0: float, d: float
          ) -> tuple[float, float]:
    """Generalised spheroid boundaries at relative time t from (t0, x0).

    Valid for t in [0, rho^-1(d^2 + rho(t0)) - t0]; both branches equal
    x0 at t = 0.
    """
    if t < 0.0:
        raise DomainError(f"psi_l requires t >= 0, got {t}")
    th, rh, _, cfun = cf_mod.evaluators(p.cs)
    u = rh(t + t0) - rh(t0)
    d2 = d * d
    if u > d2 * (1.0 + 1e-9):
        raise DomainError(
            f"psi_l: relative time {t} beyond the spheroid support "
            f"(Brownian time {u} > d^2 = {d2})")
    u = min(u, d2)
    w = _psi_upper_raw(d, u)
    scale, offset = _affine_parts(th, cfun, t + t0, t0, x0, th(t0), cfun(t0))
    return (scale * -w + offset, scale * w + offset)


def _advance(p: ExitProblem, th, rh, ri, cfun, dmfn, T: float, X: float,
             rng) -> tuple[float, float, float]:
    # one spheroid exit: sample in Brownian time, convert, land on boundary
    dm = dmfn(T, X)
    rho_t = rh(T)
    d = _scale(p, rho_t, rh(T + p.m), dm, X)
    tau, side = _sample_exit_raw(d, rng)
    tau_l = ri(tau + rho_t) - T
    t_next = T + tau_l
    w = _psi_upper_raw(d, tau)
    scale, offset = _affine_parts(th, cfun, t_next, T, X, th(T), cfun(T))
    if side == "lower":
        x_next = scale * -w + offset
    else:
        x_next = scale * w + offset
    return t_next, x_next, d


def _bind(p: ExitProblem):
    th, rh, ri, cfun = cf_mod.evaluators(p.cs)
    if p.cs.delta_m_closed is not None:
        closed = p.cs.delta_m_closed
        dmfn = lambda t0, x0: closed(t0, x0, p.a, p.b, p.m)
    else:
        dmfn = lambda t0, x0: delta_m(p, t0, x0)
    return th, rh, ri, cfun, dmfn


def step(p: ExitProblem, state: tuple[float, float], rng: np.random.Generator
         ) -> tuple[float, float, float]:
    """Advance one spheroid exit from state = (T, X); returns (T', X', d).

    Consumes exactly the three variates of one Brownian spheroid draw.
    """
    T, X = state
    if not p.a + p.eps < X < p.b - p.eps:
        raise DomainError(
            f"step requires X strictly inside the shell-reduced interval, "
            f"got X = {X}")
    th, rh, ri, cfun, dmfn = _bind(p)
    return _advance(p, th, rh, ri, cfun, dmfn, T, X, rng)


def run(p: ExitProblem, rng: np.random.Generator,
        max_steps: int = MAX_STEPS_DEFAULT) -> tuple[ExitSample, WalkSkeleton]:
    """Iterate spheroid exits until the position enters an eps-shell.

    Deterministic given (p, rng state).  The reported time is the walk
    time at the stopping node, stochastically below the true exit time.
    """
    th, rh, ri, cfun, dmfn = _bind(p)
    T, X = p.t0, p.x0
    nodes = [(T, X)]
    ds: list[float] = []
    a_stop = p.a + p.eps
    b_stop = p.b - p.eps
    n = 0
    while a_stop < X < b_stop:
        if n >= max_steps:
            raise StepLimitError(
                f"no shell entry after {max_steps} spheroid steps "
                f"(T = {T}, X = {X})")
        T, X, d = _advance(p, th, rh, ri, cfun, dmfn, T, X, rng)
        nodes.append((T, X))
        ds.append(d)
        n += 1
    side = "upper" if X >= b_stop else "lower"
    sample = ExitSample(time=T, position=X, side=side, steps=n)
    return sample, WalkSkeleton(nodes=nodes, d_used=ds)


def run_capped(p: ExitProblem, t_max: float, rng: np.random.Generator,
               max_steps: int = MAX_STEPS_DEFAULT
               ) -> tuple[ExitSample, WalkSkeleton]:
    """As run(), but stop at the first node whose time reaches t_max.

    Censored outcomes report time = t_max, the last node's position, and
    side None.
    """
    if not t_max > p.t0:
        raise DomainError(f"t_max = {t_max} must exceed t0 = {p.t0}")
    th, rh, ri, cfun, dmfn = _bind(p)
    T, X = p.t0, p.x0
    nodes = [(T, X)]
    ds: list[float] = []
    a_stop = p.a + p.eps
    b_stop = p.b - p.eps
    n = 0
    while True:
        if T >= t_max:
            sample = ExitSample(time=t_max, position=X, side=None, steps=n,
                                censored=True)
            return sample, WalkSkeleton(nodes=nodes, d_used=ds)
        if not a_stop < X < b_stop:
            side = "upper" if X >= b_stop else "lower"
            sample = ExitSample(time=T, position=X, side=side, steps=n)
            return sample, WalkSkeleton(nodes=nodes, d_used=ds)
        if n >= max_steps:
            raise StepLimitError(
                f"no shell entry after {max_steps} spheroid steps "
                f"(T = {T}, X = {X})")
        T, X, d = _advance(p, th, rh, ri, cfun, dmfn, T, X, rng)
        nodes.append((T, X))
        ds.append(d)
        n += 1


def validate(p: ExitProblem, horizon: float) -> Diagnostics:
    """Finite-horizon coefficient diagnostics on [0, horizon].

    Reports min sigma (raw, bypassing the floor guard), max |alpha| and
    max |beta|, and warns when sigma dips below the declared floor.
    """
    if not horizon > 0.0:
        raise DomainError(f"horizon must be > 0, got {horizon}")
    cs = p.cs
    grid_n = 4096
    step_w = horizon / (grid_n - 1)
    min_sigma = min(cs.sigma(i * step_w) for i in range(grid_n))
    max_a = quadrature.sup_abs_on(cs.alpha, 0.0, horizon)
    max_b = quadrature.sup_abs_on(cs.beta, 0.0, horizon)
    warnings = []
    if min_sigma < cs.sigma_floor:
        warnings.append(
            f"sigma dips to {min_sigma} on [0, {horizon}], below the "
            f"declared floor {cs.sigma_floor}")
    return Diagnostics(horizon=horizon, min_sigma=min_sigma,
                       max_abs_alpha=max_a, max_abs_beta=max_b,
                       sigma_floor=cs.sigma_floor, warnings=tuple(warnings))
