"""End-to-end acceptance suite.

Each criterion is a test that prints one PASS line (visible with -s or
in failure reports); all tolerances are pinned here.  Heavy sample
batches are shared between criteria through module-scoped fixtures and
carry their own wall-clock measurements so the runtime budgets are
checked against the work they cover.
"""

import json
import math
import time

import numpy as np
import pytest

from exitwalk.brownian import MEAN_TAU_OVER_D2, Spheroid, exit_pdf, sample_exit_many
from exitwalk.cli import main as cli_main
from exitwalk.coeffs import (
    brownian_preset,
    constant_preset,
    rho_quadrature,
    sinusoidal_boundary,
    sinusoidal_m,
    sinusoidal_preset,
)
from exitwalk.euler import EulerConfig, euler_exit_many
from exitwalk.gclass import growth_preset, log_shell_width, run_g, to_lclass
from exitwalk.harness import (
    bound_params_for,
    cdf_sandwich_check,
    exit_times,
    ks_distance,
    ks_two_sample_tolerance,
    quantile_grid,
    sample_many,
    steps_vs_logeps,
)
from exitwalk.quadrature import integrate
from exitwalk.woms import ExitProblem, psi_l, run, spheroid_scale

N_BIG = 100_000


def bm_problem(eps=1e-3):
    return ExitProblem(cs=brownian_preset(), a=-1.0, b=1.0, x0=0.0, eps=eps,
                       gamma_shell=1e-4, m=1.0)


def const_problem(eps=1e-3):
    # m only tunes the spheroid budget, never the law; 0.3 keeps the
    # drift inflation factor exp(|alpha| m) small so walks stay short
    return ExitProblem(cs=constant_preset(-1.0, 0.5, 1.0), a=-1.0, b=1.0,
                       x0=0.0, eps=eps, gamma_shell=1e-4, m=0.3)


@pytest.fixture(scope="module")
def bm_woms_big():
    p = bm_problem()
    start = time.monotonic()
    samples = sample_many(lambda rng: run(p, rng)[0], N_BIG, seed=2001)
    return {"samples": samples, "elapsed": time.monotonic() - start, "problem": p}


@pytest.fixture(scope="module")
def const_pair_big():
    p = const_problem()
    start = time.monotonic()
    woms_samples = sample_many(lambda rng: run(p, rng)[0], N_BIG, seed=2002)
    euler_samples = euler_exit_many(p.cs, p.a, p.b, p.x0,
                                    EulerConfig(h=1e-5), N_BIG, seed=2003)
    return {"woms": woms_samples, "euler": euler_samples,
            "elapsed": time.monotonic() - start, "problem": p}


@pytest.fixture(scope="module")
def bm_euler_big():
    p = bm_problem()
    return euler_exit_many(p.cs, p.a, p.b, p.x0, EulerConfig(h=1e-4),
                           N_BIG, seed=2004)


def spheroid_exit_cdf_interp(d=1.0, y_max=30.0, n=2049):
    """Quadrature CDF of the exit density, tabulated in y = log(d^2/t)."""
    s = Spheroid(d)
    ys = np.linspace(0.0, y_max, n)
    vals = np.empty_like(ys)
    for i, y in enumerate(ys):
        t = d * d * math.exp(-y)
        if t < 0.01 * d * d:
            vals[i] = integrate(lambda u: exit_pdf(s, u), 0.0, t)
        else:
            vals[i] = 1.0 - integrate(lambda u: exit_pdf(s, u), t, d * d)
    return ys, vals


def test_criterion_01_spheroid_sampler_law():
    start = time.monotonic()
    s = Spheroid(1.0)
    tau_mean, _ = sample_exit_many(s, 1_000_000, np.random.default_rng(12))
    scaled = tau_mean / s.support
    se = scaled.std() / math.sqrt(scaled.size)
    mean_err = abs(scaled.mean() - MEAN_TAU_OVER_D2)
    assert mean_err < 3 * se

    ys, cdf_grid = spheroid_exit_cdf_interp()
    tau, _ = sample_exit_many(s, 100_000, np.random.default_rng(7))
    tau.sort()
    f_at = np.interp(-np.log(tau), ys, cdf_grid)
    n = tau.size
    i = np.arange(1, n + 1)
    ks = max(np.max(np.abs(i / n - f_at)), np.max(np.abs((i - 1) / n - f_at)))
    assert ks < 0.002
    elapsed = time.monotonic() - start
    assert elapsed < 10.0
    print(f"ACCEPTANCE 1 (spheroid sampler law): mean err {mean_err:.2e} "
          f"(< 3se = {3 * se:.2e}), ks {ks:.5f} < 0.002, {elapsed:.1f}s PASS")


def test_criterion_02_boundary_geometry():
    worst_val = 0.0
    worst_loc = 0.0
    for d in (0.8, 1.0, 2.0):
        s = Spheroid(d)
        t_star = d * d / math.e
        cap = d / math.sqrt(math.e)
        grid = np.linspace(0.0, d * d, 10_000)
        ups = np.array([psi_of(s, float(t)) for t in grid])
        worst_val = max(worst_val, abs(psi_of(s, t_star) - cap))
        spacing = grid[1] - grid[0]
        worst_loc = max(worst_loc, abs(float(grid[np.argmax(ups)]) - t_star) / spacing)
        assert float(ups.max()) <= cap + 1e-12
    assert worst_val <= 1e-12
    assert worst_loc <= 1.0
    print(f"ACCEPTANCE 2 (boundary geometry): peak value err {worst_val:.2e} "
          f"<= 1e-12, argmax within {worst_loc:.2f} grid spacings PASS")


def psi_of(s, t):
    from exitwalk.brownian import psi
    return psi(s, t)[1]


def test_criterion_03_sinusoidal_closed_forms():
    start = time.monotonic()
    cs = sinusoidal_preset()
    rho_err = 0.0
    for t in np.linspace(0.5, 20.0, 40):
        t = float(t)
        rho_err = max(rho_err, abs(rho_quadrature(cs, t) - 4.0 * t) / (4.0 * t))
    assert rho_quadrature(cs, 0.0) == 0.0
    assert rho_err < 1e-8

    p = ExitProblem(cs=cs, a=-1.0, b=2.0, x0=1.0, eps=1e-2, gamma_shell=1e-4,
                    m=sinusoidal_m(-1.0, 2.0))
    n_points = 0
    boundary_err = 0.0
    for t0 in np.linspace(0.0, 2.0 * math.pi, 8):
        for x0 in (-0.5, 0.25, 1.0, 1.75):
            d = spheroid_scale(p, float(t0), x0)
            support = d * d / 4.0 * (1.0 - 1e-6)
            for t in np.linspace(0.0, support, 32):
                got = psi_l(p, float(t), float(t0), x0, d)
                want = sinusoidal_boundary(float(t), float(t0), x0, d)
                boundary_err = max(boundary_err, abs(got[0] - want[0]),
                                   abs(got[1] - want[1]))
                n_points += 1
    assert n_points >= 1000
    assert boundary_err < 1e-8
    elapsed = time.monotonic() - start
    assert elapsed < 5.0
    print(f"ACCEPTANCE 3 (closed forms): rho rel err {rho_err:.2e}, boundary "
          f"err {boundary_err:.2e} over {n_points} points, {elapsed:.1f}s PASS")


def test_criterion_04_brownian_ground_truth(bm_woms_big):
    samples = bm_woms_big["samples"]
    elapsed = bm_woms_big["elapsed"]
    times = exit_times(samples)
    mean = float(times.mean())
    assert abs(mean - 1.0) <= 0.02
    upper = np.mean([s.side == "upper" for s in samples])
    sigma_half = 0.5 / math.sqrt(len(samples))
    assert abs(upper - 0.5) <= 3 * sigma_half
    assert elapsed < 60.0
    print(f"ACCEPTANCE 4 (Brownian ground truth): mean {mean:.4f} within 2% "
          f"of 1.0, upper freq {upper:.4f} within 3sigma, {elapsed:.1f}s PASS")


def test_criterion_05_oracle_agreement(const_pair_big):
    ks = ks_distance(const_pair_big["woms"], const_pair_big["euler"])
    elapsed = const_pair_big["elapsed"]
    assert ks <= 0.015
    assert elapsed < 600.0
    print(f"ACCEPTANCE 5 (oracle agreement): ks {ks:.5f} <= 0.015 on "
          f"{N_BIG} vs {N_BIG} samples, {elapsed:.0f}s PASS")


def test_criterion_06_step_scaling():
    start = time.monotonic()
    eps_list = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5]
    results = {}
    for name, p in (("bm", bm_problem(eps=1e-2)),
                    ("sinusoidal", ExitProblem(cs=sinusoidal_preset(), a=-1.0,
                                               b=2.0, x0=1.0, eps=1e-2,
                                               gamma_shell=1e-4,
                                               m=sinusoidal_m(-1.0, 2.0)))):
        fit = steps_vs_logeps(p, eps_list, 10_000, seed=3004)
        assert all(m2 >= m1 for m1, m2 in zip(fit.mean_steps, fit.mean_steps[1:])), name
        assert fit.r2 >= 0.98, (name, fit)
        results[name] = fit
    elapsed = time.monotonic() - start
    assert elapsed < 600.0
    detail = ", ".join(f"{k}: r2={v.r2:.4f} slope={v.slope:.2f}"
                       for k, v in results.items())
    print(f"ACCEPTANCE 6 (step scaling): {detail}, {elapsed:.0f}s PASS")


def test_criterion_07_cdf_sandwich(bm_woms_big, bm_euler_big, const_pair_big):
    eps = 1e-3
    reports = {}
    for name, woms_s, euler_s, cs in (
            ("bm", bm_woms_big["samples"], bm_euler_big, brownian_preset()),
            ("constant", const_pair_big["woms"], const_pair_big["euler"],
             const_pair_big["problem"].cs)):
        grid = quantile_grid(np.concatenate([exit_times(woms_s),
                                             exit_times(euler_s)]), 512)
        bounds = bound_params_for(cs, grid)
        tol = ks_two_sample_tolerance(len(woms_s), len(euler_s), alpha=0.001)
        rep = cdf_sandwich_check(woms_s, euler_s, eps, bounds, grid=grid,
                                 rho_factor=1.05, ks_tol=tol)
        assert rep.violations_upper == 0, (name, rep)
        assert rep.violations_lower == 0, (name, rep)
        reports[name] = rep
    detail = ", ".join(
        f"{k}: margins ({v.worst_margin_upper:.4f}, {v.worst_margin_lower:.4f})"
        f" vs tol {v.ks_tol:.4f}" for k, v in reports.items())
    print(f"ACCEPTANCE 7 (cdf sandwich): zero violations on 512 grid points; "
          f"{detail} PASS")


def test_criterion_08_growth_consistency():
    g = growth_preset(0.5, 0.0, 1.0)
    a, b, x0, eps_g = 0.5, 2.0, 1.0, 1e-3
    lp = ExitProblem(cs=to_lclass(g), a=math.log(a), b=math.log(b),
                     x0=math.log(x0), eps=log_shell_width(eps_g, b))
    for seed in range(5):
        image = run_g(g, a, b, x0, eps_g=eps_g, rng=np.random.default_rng(seed))
        base, _ = run(lp, np.random.default_rng(seed))
        assert image.time == base.time
        assert image.position == math.exp(base.position)
        assert image.steps == base.steps

    samples = sample_many(
        lambda rng: run_g(g, a, b, x0, eps_g=eps_g, rng=rng), N_BIG, seed=2005)
    mean = float(np.mean(exit_times(samples)))
    target = math.log(2.0) ** 2
    assert abs(mean - target) / target <= 0.02
    print(f"ACCEPTANCE 8 (growth link): bit-exact image over 5 seeds, mean "
          f"{mean:.4f} within 2% of (log 2)^2 = {target:.4f} PASS")


def _rerun_bytes_identical(tmp_path, tag, args, filenames):
    out = tmp_path / tag
    assert cli_main(args + ["--out-dir", str(out)]) == 0
    first = {name: (out / name).read_bytes() for name in filenames}
    assert cli_main(args + ["--out-dir", str(out)]) == 0
    for name in filenames:
        assert (out / name).read_bytes() == first[name], (tag, name)


def test_criterion_09_cli_determinism(tmp_path):
    _rerun_bytes_identical(
        tmp_path, "sample",
        ["sample", "--preset", "bm", "--eps", "1e-3", "--n", "200",
         "--seed", "5"],
        ["samples.csv", "report.json"])
    _rerun_bytes_identical(
        tmp_path, "steps",
        ["steps", "--preset", "bm", "--eps-list", "1e-1,1e-2,1e-3",
         "--n-per-eps", "200", "--seed", "5"],
        ["steps.csv", "fit.json"])
    _rerun_bytes_identical(
        tmp_path, "compare",
        ["compare", "--preset", "constant", "--alpha0", "-1", "--beta0", "0.5",
         "--sigma0", "1", "--eps", "1e-2", "--n", "300", "--seed", "5",
         "--euler-h", "1e-3"],
        ["compare.json", "cdf_woms.csv", "cdf_euler.csv"])
    _rerun_bytes_identical(
        tmp_path, "demo",
        ["demo-sinusoidal", "--n", "300", "--seed", "5", "--n-per-eps", "50"],
        ["demo.json", "demo_histogram.csv", "demo_steps.csv"])
    print("ACCEPTANCE 9 (CLI determinism): byte-identical reruns for "
          "sample/steps/compare/demo-sinusoidal PASS")


def test_criterion_10_sinusoidal_demo(tmp_path):
    out = tmp_path / "demo10"
    assert cli_main(["demo-sinusoidal", "--n", "20000", "--seed", "0",
                     "--n-per-eps", "500", "--out-dir", str(out)]) == 0
    payload = json.loads((out / "demo.json").read_text())
    assert payload["checks"]["rho_check_passed"]
    assert payload["checks"]["boundary_check_passed"]
    assert payload["n_outside_shells"] == 0
    assert payload["min_exit_time"] > 0.0
    hist_rows = (out / "demo_histogram.csv").read_text().strip().splitlines()[1:]
    assert sum(int(r.split(",")[2]) for r in hist_rows) == 20000

    # independent spot check of the same configuration, positions in shells
    p = ExitProblem(cs=sinusoidal_preset(), a=-1.0, b=2.0, x0=1.0, eps=1e-2,
                    gamma_shell=1e-4, m=sinusoidal_m(-1.0, 2.0))
    mini = sample_many(lambda rng: run(p, rng)[0], 3000, seed=1)
    for s in mini:
        assert s.time > 0.0
        assert (-1.0 <= s.position <= -1.0 + 1e-2
                or 2.0 - 1e-2 <= s.position <= 2.0)
    print("ACCEPTANCE 10 (sinusoidal demo): shells clean, times positive, "
          "closed-form checks pass PASS")
