"""Monte Carlo batch harness: replica streams, empirical statistics, and
the two distribution-level checks used for validation (step-count scaling
in |log eps|, and the CDF sandwich against an oracle sample).
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import quadrature
from .coeffs import CoefficientSet
from .errors import DomainError
from .woms import ExitProblem, ExitSample, run

__all__ = [
    "sample_many", "exit_times", "empirical_cdf", "ks_distance",
    "ks_two_sample_tolerance", "quantile_grid", "steps_vs_logeps",
    "StepScalingFit", "BoundParams", "bound_params_for",
    "cdf_sandwich_check", "SandwichReport", "histogram", "McReport",
    "build_report",
]


def sample_many(runner: Callable[[np.random.Generator], ExitSample],
                n: int, seed, threads: int = 1) -> list[ExitSample]:
    """n independent samples from replica streams derived from seed.

    Replica i always consumes child stream i of SeedSequence(seed), so
    the result is independent of execution order and of the thread count.
    """
    if n < 1:
        raise DomainError("sample_many needs n >= 1")
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = root.spawn(n)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda ss: runner(np.random.default_rng(ss)), children))
    return [runner(np.random.default_rng(ss)) for ss in children]


def exit_times(samples) -> np.ndarray:
    """Exit times of a sample batch (accepts ExitSamples or raw floats)."""
    if len(samples) and isinstance(samples[0], ExitSample):
        return np.asarray([s.time for s in samples], dtype=float)
    return np.asarray(samples, dtype=float)


def _ecdf_at(sorted_times: np.ndarray, grid: np.ndarray) -> np.ndarray:
    return np.searchsorted(sorted_times, grid, side="right") / sorted_times.size


def empirical_cdf(samples, grid) -> list[tuple[float, float]]:
    """Right-continuous empirical CDF evaluated on the given grid."""
    times = exit_times(samples)
    if times.size == 0:
        raise DomainError("empirical_cdf needs a nonempty sample")
    grid = np.asarray(grid, dtype=float)
    vals = _ecdf_at(np.sort(times), grid)
    return [(float(t), float(v)) for t, v in zip(grid, vals)]


def ks_distance(samples_a, samples_b) -> float:
    """Exact sup distance between the two empirical CDFs."""
    ta = np.sort(exit_times(samples_a))
    tb = np.sort(exit_times(samples_b))
    if ta.size == 0 or tb.size == 0:
        raise DomainError("ks_distance needs nonempty samples")
    pooled = np.concatenate([ta, tb])
    pooled.sort()
    fa = _ecdf_at(ta, pooled)
    fb = _ecdf_at(tb, pooled)
    return float(np.max(np.abs(fa - fb)))


def ks_two_sample_tolerance(n: int, m: int, alpha: float = 0.001) -> float:
    """Two-sample KS critical distance at level alpha (asymptotic)."""
    c = math.sqrt(-math.log(alpha / 2.0) / 2.0)
    return c * math.sqrt((n + m) / (n * m))


def quantile_grid(samples, n_points: int = 512) -> np.ndarray:
    """Quantile-spaced evaluation grid over the pooled sample."""
    times = exit_times(samples)
    return np.quantile(times, np.linspace(0.0, 1.0, n_points))


# -- step-count scaling -------------------------------------------------------

@dataclass(frozen=True)
class StepScalingFit:
    """Per-eps mean step counts with the affine fit in |log eps|."""

    eps: tuple[float, ...]
    abs_log_eps: tuple[float, ...]
    mean_steps: tuple[float, ...]
    slope: float
    intercept: float
    r2: float


def steps_vs_logeps(problem: ExitProblem, eps_list: Sequence[float],
                    n_per_eps: int, seed, threads: int = 1) -> StepScalingFit:
    """Mean walk length for each shell width, plus a least-squares line.

    eps_list must be decreasing; a single point yields a degenerate fit
    reported as NaNs.
    """
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise DomainError("steps_vs_logeps needs a nonempty eps list")
    if any(e2 >= e1 for e1, e2 in zip(eps_list, eps_list[1:])):
        raise DomainError("eps_list must be strictly decreasing")
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    means = []
    for eps, child in zip(eps_list, root.spawn(len(eps_list))):
        p = dataclasses.replace(problem, eps=eps)
        samples = sample_many(lambda rng: run(p, rng)[0], n_per_eps, child,
                              threads=threads)
        means.append(float(np.mean([s.steps for s in samples])))
    x = np.abs(np.log(np.asarray(eps_list)))
    y = np.asarray(means)
    if len(eps_list) < 2:
        slope = intercept = r2 = float("nan")
    else:
        slope, intercept = np.polyfit(x, y, 1)
        resid = y - (slope * x + intercept)
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else float("nan")
    return StepScalingFit(eps=tuple(eps_list), abs_log_eps=tuple(map(float, x)),
                          mean_steps=tuple(means), slope=float(slope),
                          intercept=float(intercept), r2=float(r2))


# -- CDF sandwich -------------------------------------------------------------

@dataclass(frozen=True)
class BoundParams:
    """Per-grid-point sup of |beta| on [0, t], and the sigma floor."""

    beta_bar: tuple[float, ...]
    sigma_floor: float


def bound_params_for(cs: CoefficientSet, grid) -> BoundParams:
    grid = np.asarray(grid, dtype=float)
    bars = tuple(quadrature.sup_abs_on(cs.beta, 0.0, max(float(t), 1e-12))
                 for t in grid)
    return BoundParams(beta_bar=bars, sigma_floor=cs.sigma_floor)


@dataclass(frozen=True)
class SandwichReport:
    """Outcome of the two-sided CDF comparison on a grid.

    upper check:  F_oracle(t) <= F_walk(t) + ks_tol
    lower check:  (1 - rho sqrt(eps) (1 + beta_bar_t) / sigma_floor)
                      * F_walk(t - eps) <= F_oracle(t) + ks_tol
    A grid point whose prefactor is <= 0 makes the lower check vacuous
    and is only counted, never flagged as a violation.
    """

    eps: float
    rho_factor: float
    ks_tol: float
    n_grid: int
    violations_upper: int
    violations_lower: int
    vacuous_points: int
    worst_margin_upper: float
    worst_margin_lower: float


def cdf_sandwich_check(woms_samples, oracle_samples, eps: float,
                       bound_params: BoundParams, grid=None,
                       rho_factor: float = 1.05,
                       ks_tol: float | None = None) -> SandwichReport:
    """Check the oracle CDF against the walk CDF sandwich on a grid."""
    tw = np.sort(exit_times(woms_samples))
    to = np.sort(exit_times(oracle_samples))
    if tw.size == 0 or to.size == 0:
        raise DomainError("cdf_sandwich_check needs nonempty samples")
    if grid is None:
        grid = quantile_grid(np.concatenate([tw, to]))
    grid = np.asarray(grid, dtype=float)
    if len(bound_params.beta_bar) != grid.size:
        raise DomainError("bound_params.beta_bar must align with the grid")
    if ks_tol is None:
        ks_tol = ks_two_sample_tolerance(tw.size, to.size)
    f_w = _ecdf_at(tw, grid)
    f_o = _ecdf_at(to, grid)
    f_w_shift = _ecdf_at(tw, grid - eps)
    beta_bar = np.asarray(bound_params.beta_bar)
    prefactor = 1.0 - rho_factor * math.sqrt(eps) * (1.0 + beta_bar) / bound_params.sigma_floor
    vacuous = prefactor <= 0.0
    margin_upper = f_o - f_w                      # must stay <= ks_tol
    margin_lower = prefactor * f_w_shift - f_o    # must stay <= ks_tol
    viol_upper = int(np.sum(margin_upper > ks_tol))
    viol_lower = int(np.sum((margin_lower > ks_tol) & ~vacuous))
    return SandwichReport(
        eps=float(eps), rho_factor=float(rho_factor), ks_tol=float(ks_tol),
        n_grid=int(grid.size),
        violations_upper=viol_upper, violations_lower=viol_lower,
        vacuous_points=int(np.sum(vacuous)),
        worst_margin_upper=float(np.max(margin_upper)),
        worst_margin_lower=float(np.max(np.where(vacuous, -np.inf, margin_lower))),
    )


# -- histogram and report -----------------------------------------------------

def histogram(samples, binning=None) -> list[tuple[float, float, int]]:
    """Counts per bin; Freedman-Diaconis width unless binning overrides."""
    times = exit_times(samples)
    if times.size == 0:
        raise DomainError("histogram needs a nonempty sample")
    counts, edges = np.histogram(times, bins=binning if binning is not None else "fd")
    return [(float(edges[i]), float(edges[i + 1]), int(counts[i]))
            for i in range(len(counts))]


@dataclass(frozen=True)
class McReport:
    """Aggregate statistics of one batch, JSON-ready via to_dict()."""

    n_samples: int
    mean_time: float
    var_time: float
    side_freq_upper: float
    side_freq_lower: float
    censored_fraction: float
    mean_steps: float
    max_steps: int
    cdf: tuple[tuple[float, float], ...]
    histogram: tuple[tuple[float, float, int], ...]
    alpha_bar: float
    beta_bar: float
    sigma_min: float
    sigma_floor: float
    ks_vs_oracle: float | None = None
    per_eps_steps: tuple[tuple[float, float], ...] | None = None

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["cdf"] = [[t, f] for t, f in self.cdf]
        d["histogram"] = [[lo, hi, c] for lo, hi, c in self.histogram]
        if self.per_eps_steps is not None:
            d["per_eps_steps"] = [[e, s] for e, s in self.per_eps_steps]
        return d


def build_report(samples: Sequence[ExitSample], cs: CoefficientSet,
                 ks_vs_oracle: float | None = None,
                 per_eps_steps=None,
                 cdf_points: int = 512) -> McReport:
    """Summarise a batch and attach the finite-horizon bound parameters."""
    if not samples:
        raise DomainError("build_report needs a nonempty sample list")
    times = exit_times(samples)
    n = len(samples)
    uncensored = [s for s in samples if not s.censored]
    n_upper = sum(1 for s in uncensored if s.side == "upper")
    n_lower = sum(1 for s in uncensored if s.side == "lower")
    steps = np.asarray([s.steps for s in samples])
    horizon = max(float(times.max()), 1e-12)
    grid_n = min(cdf_points, n)
    cdf = empirical_cdf(samples, np.quantile(times, np.linspace(0.0, 1.0, grid_n)))
    sig_grid = np.linspace(0.0, horizon, 2048)
    sigma_min = float(min(cs.sigma(float(t)) for t in sig_grid))
    return McReport(
        n_samples=n,
        mean_time=float(times.mean()),
        var_time=float(times.var(ddof=1)) if n > 1 else 0.0,
        side_freq_upper=n_upper / n,
        side_freq_lower=n_lower / n,
        censored_fraction=(n - len(uncensored)) / n,
        mean_steps=float(steps.mean()),
        max_steps=int(steps.max()),
        cdf=tuple((float(t), float(f)) for t, f in cdf),
        histogram=tuple(histogram(samples)),
        alpha_bar=float(quadrature.sup_abs_on(cs.alpha, 0.0, horizon)),
        beta_bar=float(quadrature.sup_abs_on(cs.beta, 0.0, horizon)),
        sigma_min=sigma_min,
        sigma_floor=cs.sigma_floor,
        ks_vs_oracle=ks_vs_oracle,
        per_eps_steps=(None if per_eps_steps is None
                       else tuple((float(e), float(s)) for e, s in per_eps_steps)),
    )
