"""Command-line interface: batch sampling, step-count scaling, oracle
comparison, and the sinusoidal demonstration.

All outputs are plain CSV/JSON with shortest-round-trip float formatting
and no timestamps, so a command rerun with the same configuration and
seed reproduces its files byte for byte.  Exit codes: 0 success, 2
configuration error, 3 numeric failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import coeffs, gclass, harness, woms
from .errors import (
    CoefficientError,
    ConfigError,
    DomainError,
    ExitwalkError,
    InversionError,
    QuadratureError,
    StepLimitError,
)
from .euler import EulerConfig, euler_exit_many

__all__ = ["RunConfig", "main"]

THREADS_ENV = "EXITWALK_THREADS"


@dataclass(frozen=True)
class RunConfig:
    """One reproducible run: coefficients, geometry, batch size, outputs."""

    preset: str = "bm"
    a: float = -1.0
    b: float = 1.0
    x0: float = 0.0
    t0: float = 0.0
    eps: float = woms.DEFAULT_EPS
    gamma: float = woms.DEFAULT_GAMMA
    m: float | None = None
    n: int = 1000
    seed: int = 0
    out_dir: str = "exitwalk_out"
    tmax: float | None = None
    alpha0: float = 0.0
    beta0: float = 0.0
    sigma0: float = 1.0
    ou_k: float = 1.0
    ou_mu: float = 0.0
    galpha: float = 0.5
    gbeta: float = 0.0
    gsigma: float = 1.0
    euler_h: float = 1e-4
    euler_bridge: bool = True
    euler_cap: float = 1e3

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def _flatten_file_config(raw: dict) -> dict:
    # the euler sub-object maps onto euler_* keys; anything else is flat
    data = dict(raw)
    euler = data.pop("euler", None)
    if euler is not None:
        if not isinstance(euler, dict):
            raise ConfigError("'euler' must be an object with h/bridge/cap")
        unknown = set(euler) - {"h", "bridge", "cap"}
        if unknown:
            raise ConfigError(f"unknown euler config keys: {sorted(unknown)}")
        if "h" in euler:
            data["euler_h"] = euler["h"]
        if "bridge" in euler:
            data["euler_bridge"] = euler["bridge"]
        if "cap" in euler:
            data["euler_cap"] = euler["cap"]
    return data


def load_config(path: str | None, overrides: dict) -> RunConfig:
    """Config file values first, explicit flag values on top."""
    data: dict = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
        if not isinstance(raw, dict):
            raise ConfigError("config file must contain a JSON object")
        data.update(_flatten_file_config(raw))
    data.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(data)


def resolved_m(cfg: RunConfig) -> float:
    if cfg.m is not None:
        return cfg.m
    if cfg.preset == "sinusoidal":
        return coeffs.sinusoidal_m(cfg.a, cfg.b)
    return woms.DEFAULT_M


def build_coefficients(cfg: RunConfig) -> coeffs.CoefficientSet:
    if cfg.preset == "bm":
        return coeffs.brownian_preset()
    if cfg.preset == "constant":
        return coeffs.constant_preset(cfg.alpha0, cfg.beta0, cfg.sigma0)
    if cfg.preset == "ou":
        return coeffs.ou_preset(cfg.ou_k, cfg.ou_mu, cfg.sigma0)
    if cfg.preset == "sinusoidal":
        return coeffs.sinusoidal_preset()
    raise ConfigError(
        f"unknown preset {cfg.preset!r}; expected one of {coeffs.PRESET_NAMES}")


def build_problem(cfg: RunConfig) -> woms.ExitProblem:
    try:
        return woms.ExitProblem(
            cs=build_coefficients(cfg), a=cfg.a, b=cfg.b, x0=cfg.x0,
            t0=cfg.t0, eps=cfg.eps, gamma_shell=cfg.gamma, m=resolved_m(cfg))
    except ExitwalkError as exc:
        raise ConfigError(str(exc)) from exc


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc


def _write_samples_csv(path: Path, samples) -> None:
    with path.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["index", "exit_time", "exit_position", "side", "steps"])
        for i, s in enumerate(samples):
            w.writerow([i, repr(float(s.time)), repr(float(s.position)),
                        s.side if s.side is not None else "none", s.steps])


def _write_cdf_csv(path: Path, cdf_pairs) -> None:
    with path.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["t", "cdf"])
        for t, v in cdf_pairs:
            w.writerow([repr(float(t)), repr(float(v))])


def _write_json(path: Path, obj: dict) -> None:
    with path.open("w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def _growth_runner(cfg: RunConfig):
    if not cfg.a > 0.0:
        raise ConfigError(f"growth preset needs a > 0, got a = {cfg.a}")
    if not cfg.a < cfg.x0 < cfg.b:
        raise ConfigError(f"x0 = {cfg.x0} not inside ({cfg.a}, {cfg.b})")
    g = gclass.growth_preset(cfg.galpha, cfg.gbeta, cfg.gsigma)
    m = cfg.m if cfg.m is not None else woms.DEFAULT_M

    def runner(rng):
        return gclass.run_g(g, cfg.a, cfg.b, cfg.x0, cfg.eps,
                            gamma_shell=cfg.gamma, m=m, rng=rng, t0=cfg.t0)

    return runner, gclass.to_lclass(g)


def cmd_sample(cfg: RunConfig) -> int:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.preset == "growth":
        runner, cs = _growth_runner(cfg)
        diagnostics_problem = None
    else:
        problem = build_problem(cfg)
        cs = problem.cs
        diagnostics_problem = problem
        if cfg.tmax is not None:
            tmax = cfg.tmax
            runner = lambda rng: woms.run_capped(problem, tmax, rng)[0]
        else:
            runner = lambda rng: woms.run(problem, rng)[0]
    samples = harness.sample_many(runner, cfg.n, cfg.seed, threads=_threads())
    report = harness.build_report(samples, cs)
    payload = {"config": cfg.to_dict(), "report": report.to_dict()}
    if diagnostics_problem is not None:
        diag = woms.validate(diagnostics_problem, max(report.mean_time, 1e-6) * 2.0)
        payload["diagnostics"] = dataclasses.asdict(diag)
        payload["diagnostics"]["warnings"] = list(diag.warnings)
    _write_samples_csv(out / "samples.csv", samples)
    _write_json(out / "report.json", payload)
    print(f"sample: n={cfg.n} mean_time={report.mean_time:.6g} "
          f"mean_steps={report.mean_steps:.4g} -> {out}")
    return 0


def _parse_eps_list(text: str) -> list[float]:
    items = [s for s in (piece.strip() for piece in text.split(",")) if s]
    if not items:
        raise ConfigError("eps list is empty")
    try:
        values = [float(s) for s in items]
    except ValueError as exc:
        raise ConfigError(f"bad eps list {text!r}") from exc
    return values


def cmd_steps(cfg: RunConfig, eps_text: str, n_per_eps: int) -> int:
    if cfg.preset == "growth":
        raise ConfigError("steps scaling runs on linear presets only")
    eps_list = _parse_eps_list(eps_text)
    base = build_problem(cfg)
    # the problem must be valid for every requested shell width
    for e in eps_list:
        if not base.a + e < base.b - e:
            raise ConfigError(f"eps = {e} too wide for [{base.a}, {base.b}]")
    fit = harness.steps_vs_logeps(base, eps_list, n_per_eps, cfg.seed,
                                  threads=_threads())
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "steps.csv").open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["eps", "abs_log_eps", "mean_steps", "n_per_eps"])
        for e, x, y in zip(fit.eps, fit.abs_log_eps, fit.mean_steps):
            w.writerow([repr(e), repr(x), repr(y), n_per_eps])
    _write_json(out / "fit.json", {
        "config": cfg.to_dict(),
        "n_per_eps": n_per_eps,
        "fit": dataclasses.asdict(fit),
    })
    print(f"steps: slope={fit.slope:.4g} r2={fit.r2:.4g} -> {out}")
    return 0


def cmd_compare(cfg: RunConfig) -> int:
    if cfg.preset == "growth":
        raise ConfigError("compare runs on linear presets only")
    problem = build_problem(cfg)
    woms_seed, euler_seed = np.random.SeedSequence(cfg.seed).spawn(2)
    woms_samples = harness.sample_many(
        lambda rng: woms.run(problem, rng)[0], cfg.n, woms_seed,
        threads=_threads())
    euler_cfg = EulerConfig(h=cfg.euler_h, bridge_correction=cfg.euler_bridge,
                            t_cap=cfg.euler_cap)
    euler_samples = euler_exit_many(problem.cs, cfg.a, cfg.b, cfg.x0,
                                    euler_cfg, cfg.n, euler_seed, t0=cfg.t0)
    ks = harness.ks_distance(woms_samples, euler_samples)
    grid = harness.quantile_grid(
        np.concatenate([harness.exit_times(woms_samples),
                        harness.exit_times(euler_samples)]))
    bounds = harness.bound_params_for(problem.cs, grid)
    sandwich = harness.cdf_sandwich_check(woms_samples, euler_samples,
                                          cfg.eps, bounds, grid=grid)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_cdf_csv(out / "cdf_woms.csv", harness.empirical_cdf(woms_samples, grid))
    _write_cdf_csv(out / "cdf_euler.csv", harness.empirical_cdf(euler_samples, grid))
    _write_json(out / "compare.json", {
        "config": cfg.to_dict(),
        "ks_distance": ks,
        "ks_tol": sandwich.ks_tol,
        "woms_report": harness.build_report(woms_samples, problem.cs,
                                            ks_vs_oracle=ks).to_dict(),
        "euler_mean_time": float(np.mean(harness.exit_times(euler_samples))),
        "euler_censored_fraction":
            sum(s.censored for s in euler_samples) / len(euler_samples),
        "sandwich": dataclasses.asdict(sandwich),
    })
    print(f"compare: ks={ks:.5g} tol={sandwich.ks_tol:.5g} "
          f"violations=({sandwich.violations_upper},{sandwich.violations_lower}) "
          f"-> {out}")
    return 0


DEMO_A, DEMO_B, DEMO_X0 = -1.0, 2.0, 1.0
DEMO_EPS, DEMO_GAMMA = 1e-2, 1e-4
DEMO_STEPS_EPS = "1e-1,1e-2,1e-3,1e-4,1e-5"


def cmd_demo_sinusoidal(n: int, seed: int, out_dir: str,
                        n_per_eps: int = 2000) -> int:
    cs = coeffs.sinusoidal_preset()
    m = coeffs.sinusoidal_m(DEMO_A, DEMO_B)
    problem = woms.ExitProblem(cs=cs, a=DEMO_A, b=DEMO_B, x0=DEMO_X0,
                               eps=DEMO_EPS, gamma_shell=DEMO_GAMMA, m=m)

    # closed forms against the quadrature routes, before any sampling
    rho_err = 0.0
    for t in np.linspace(0.5, 20.0, 40):
        t = float(t)
        rho_err = max(rho_err, abs(coeffs.rho_quadrature(cs, t) - 4.0 * t)
                      / (4.0 * t))
    boundary_err = 0.0
    for t0 in np.linspace(0.0, 2.0 * math.pi, 8):
        for x0 in (-0.5, 0.25, 1.0, 1.75):
            d = woms.spheroid_scale(problem, float(t0), x0)
            # stay off the collapsing tip, where cancellation in the
            # rho difference meets an unbounded boundary derivative
            support = d * d / 4.0 * (1.0 - 1e-6)
            for t in np.linspace(0.0, support, 32):
                lo, up = woms.psi_l(problem, float(t), float(t0), x0, d)
                lo_c, up_c = coeffs.sinusoidal_boundary(float(t), float(t0), x0, d)
                boundary_err = max(boundary_err, abs(lo - lo_c), abs(up - up_c))
    checks = {
        "rho_quadrature_max_rel_err": float(rho_err),
        "rho_check_passed": bool(rho_err < 1e-8),
        "boundary_closed_form_max_abs_err": float(boundary_err),
        "boundary_check_passed": bool(boundary_err < 1e-8),
    }
    if not (checks["rho_check_passed"] and checks["boundary_check_passed"]):
        raise QuadratureError(f"closed-form consistency checks failed: {checks}")

    samples = harness.sample_many(lambda rng: woms.run(problem, rng)[0],
                                  n, seed, threads=_threads())
    times = harness.exit_times(samples)
    in_upper = sum(1 for s in samples if DEMO_B - DEMO_EPS <= s.position <= DEMO_B)
    in_lower = sum(1 for s in samples if DEMO_A <= s.position <= DEMO_A + DEMO_EPS)
    hist = harness.histogram(samples)
    fit = harness.steps_vs_logeps(problem, _parse_eps_list(DEMO_STEPS_EPS),
                                  n_per_eps, seed + 1, threads=_threads())

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "demo_histogram.csv").open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, count in hist:
            w.writerow([repr(lo), repr(hi), count])
    with (out / "demo_steps.csv").open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["eps", "abs_log_eps", "mean_steps", "n_per_eps"])
        for e, x, y in zip(fit.eps, fit.abs_log_eps, fit.mean_steps):
            w.writerow([repr(e), repr(x), repr(y), n_per_eps])
    _write_json(out / "demo.json", {
        "settings": {"a": DEMO_A, "b": DEMO_B, "x0": DEMO_X0, "eps": DEMO_EPS,
                     "gamma": DEMO_GAMMA, "m": m, "n": n, "seed": seed},
        "checks": checks,
        "mean_exit_time": float(times.mean()),
        "min_exit_time": float(times.min()),
        "n_in_upper_shell": in_upper,
        "n_in_lower_shell": in_lower,
        "n_outside_shells": len(samples) - in_upper - in_lower,
        "steps_fit": dataclasses.asdict(fit),
    })
    print(f"demo-sinusoidal: m={m:.6g} mean_time={times.mean():.6g} "
          f"shells=({in_lower},{in_upper}) -> {out}")
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="JSON config file; flags override")
    p.add_argument("--preset", default=None,
                   help="bm | constant | ou | sinusoidal | growth")
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--b", type=float, default=None)
    p.add_argument("--x0", type=float, default=None)
    p.add_argument("--t0", type=float, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--m", type=float, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", dest="out_dir", default=None)
    p.add_argument("--tmax", type=float, default=None)
    p.add_argument("--alpha0", type=float, default=None)
    p.add_argument("--beta0", type=float, default=None)
    p.add_argument("--sigma0", type=float, default=None)
    p.add_argument("--ou-k", dest="ou_k", type=float, default=None)
    p.add_argument("--ou-mu", dest="ou_mu", type=float, default=None)
    p.add_argument("--galpha", type=float, default=None)
    p.add_argument("--gbeta", type=float, default=None)
    p.add_argument("--gsigma", type=float, default=None)
    p.add_argument("--euler-h", dest="euler_h", type=float, default=None)
    p.add_argument("--euler-bridge", dest="euler_bridge",
                   action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--euler-cap", dest="euler_cap", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exitwalk",
        description="Exit-time sampling for linear and growth diffusions "
                    "via a walk on moving spheroids.")
    sub = parser.add_subparsers(dest="command", required=True)
    p_sample = sub.add_parser("sample", help="draw exit samples, write CSV + report")
    _add_common(p_sample)
    p_steps = sub.add_parser("steps", help="mean step count per shell width")
    _add_common(p_steps)
    p_steps.add_argument("--eps-list", dest="eps_list", required=True,
                         help="comma-separated decreasing shell widths")
    p_steps.add_argument("--n-per-eps", dest="n_per_eps", type=int, default=1000)
    p_compare = sub.add_parser("compare", help="walk vs Euler oracle")
    _add_common(p_compare)
    p_demo = sub.add_parser("demo-sinusoidal",
                            help="the oscillating benchmark, end to end")
    p_demo.add_argument("--n", type=int, default=100_000)
    p_demo.add_argument("--seed", type=int, default=0)
    p_demo.add_argument("--out-dir", dest="out_dir", default="exitwalk_out")
    p_demo.add_argument("--n-per-eps", dest="n_per_eps", type=int, default=2000)
    return parser


_CONFIG_KEYS = [f.name for f in dataclasses.fields(RunConfig)]


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        if args.command == "demo-sinusoidal":
            return cmd_demo_sinusoidal(args.n, args.seed, args.out_dir,
                                       n_per_eps=args.n_per_eps)
        overrides = {k: getattr(args, k) for k in _CONFIG_KEYS if hasattr(args, k)}
        cfg = load_config(args.config, overrides)
        if args.command == "sample":
            return cmd_sample(cfg)
        if args.command == "steps":
            return cmd_steps(cfg, args.eps_list, args.n_per_eps)
        if args.command == "compare":
            return cmd_compare(cfg)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (QuadratureError, InversionError, StepLimitError, DomainError,
            CoefficientError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
