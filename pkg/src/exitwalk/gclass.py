"""Growth (positive) diffusions handled through their logarithm.

A growth diffusion solves

    dY_t = (alpha_g(t) Y_t + beta_g(t) Y_t log Y_t) dt + sigma_g(t) Y_t dW_t,

and X = log Y is then a linear diffusion with coefficients

    alpha_L = beta_g,   beta_L = alpha_g - sigma_g^2 / 2,   sigma_L = sigma_g.

Exiting [a, b] for Y is exiting [log a, log b] for X, so the linear walk
engine applies verbatim; positions are exponentiated on the way out.
The closed solution map Y_t = y0 * G(t, W_{gamma(t)}) with

    G(t, x) = C(t) exp( sigma_g(t) / sqrt(gamma'(t)) * x ),
    gamma(t) = int_0^t sigma_g^2 exp(-2 int_0^s beta_g),
    C(t) = exp( exp(int_0^t beta_g) int_0^t (alpha_g - sigma_g^2/2)
                exp(-int_0^s beta_g) ds )

is evaluated here directly from these formulas (not through the log
link), so the two routes cross-validate each other in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import quadrature
from .coeffs import CoefficientSet, constant_preset
from .errors import CoefficientError, DomainError
from .woms import MAX_STEPS_DEFAULT, DEFAULT_GAMMA, DEFAULT_M, ExitProblem, ExitSample, run

__all__ = ["GCoefficientSet", "to_lclass", "g_solution", "run_g",
           "growth_preset", "log_shell_width"]


@dataclass(frozen=True)
class GCoefficientSet:
    """Coefficient triple of a growth diffusion; sigma_g must stay above
    sigma_floor > 0 on every queried time."""

    alpha_g: Callable[[float], float]
    beta_g: Callable[[float], float]
    sigma_g: Callable[[float], float]
    sigma_floor: float
    const_coeffs: tuple[float, float, float] | None = None

    def __post_init__(self):
        if not (self.sigma_floor > 0.0):
            raise CoefficientError(f"sigma_floor must be > 0, got {self.sigma_floor}")


def growth_preset(alpha0: float, beta0: float, sigma0: float) -> GCoefficientSet:
    """Constant-coefficient growth diffusion."""
    if not sigma0 > 0.0:
        raise CoefficientError(f"sigma0 must be > 0, got {sigma0}")
    a0, b0, s0 = float(alpha0), float(beta0), float(sigma0)
    return GCoefficientSet(
        alpha_g=lambda t: a0,
        beta_g=lambda t: b0,
        sigma_g=lambda t: s0,
        sigma_floor=s0,
        const_coeffs=(a0, b0, s0),
    )


def to_lclass(g: GCoefficientSet) -> CoefficientSet:
    """Coefficients of log Y: (beta_g, alpha_g - sigma_g^2/2, sigma_g)."""
    if g.const_coeffs is not None:
        a0, b0, s0 = g.const_coeffs
        return constant_preset(b0, a0 - 0.5 * s0 * s0, s0)
    return CoefficientSet(
        alpha=g.beta_g,
        beta=lambda t: g.alpha_g(t) - 0.5 * g.sigma_g(t) ** 2,
        sigma=g.sigma_g,
        sigma_floor=g.sigma_floor,
    )


def g_solution(g: GCoefficientSet, t: float, w: float) -> float:
    """The closed map G(t, w); G(0, 0) = 1 so Y_0 = y0 * G(0, 0) = y0.

    Evaluated directly from the growth-side formulas via quadrature.
    """
    if t < 0.0:
        raise DomainError(f"g_solution requires t >= 0, got {t}")
    b_int = quadrature.integrate(g.beta_g, 0.0, t)
    gamma_prime = g.sigma_g(t) ** 2 * math.exp(-2.0 * b_int)
    slope = g.sigma_g(t) / math.sqrt(gamma_prime)

    def inner(s: float) -> float:
        return ((g.alpha_g(s) - 0.5 * g.sigma_g(s) ** 2)
                * math.exp(-quadrature.integrate(g.beta_g, 0.0, s)))

    c_of_t = math.exp(math.exp(b_int) * quadrature.integrate(inner, 0.0, t))
    return c_of_t * math.exp(slope * w)


def log_shell_width(eps_g: float, b: float) -> float:
    """Shell width for the log-space problem: eps_g / b, so the image
    shell near the upper boundary has width at most eps_g."""
    return eps_g / b


def run_g(g: GCoefficientSet, a: float, b: float, x0: float, eps_g: float,
          gamma_shell: float = DEFAULT_GAMMA, m: float = DEFAULT_M,
          rng: np.random.Generator | None = None, t0: float = 0.0,
          max_steps: int = MAX_STEPS_DEFAULT) -> ExitSample:
    """Exit of the growth diffusion from [a, b], 0 < a < x0 < b.

    Runs the linear walk on [log a, log b] from log x0 with shell width
    eps_g / b and returns the same exit time with the position mapped
    back through exp.
    """
    if not a > 0.0:
        raise DomainError(f"growth diffusions are positive; need a > 0, got {a}")
    if not a < x0 < b:
        raise DomainError(f"x0 = {x0} not inside ({a}, {b})")
    if rng is None:
        raise DomainError("run_g requires an explicit random generator")
    problem = ExitProblem(
        cs=to_lclass(g),
        a=math.log(a), b=math.log(b), x0=math.log(x0), t0=t0,
        eps=log_shell_width(eps_g, b), gamma_shell=gamma_shell, m=m)
    sample, _ = run(problem, rng, max_steps=max_steps)
    return ExitSample(time=sample.time, position=math.exp(sample.position),
                      side=sample.side, steps=sample.steps,
                      censored=sample.censored)
