"""
Acceptance checks, one test per criterion.

Every tolerance is pinned below.  The shared step experiment (defaults:
N=64, sigma=10, I=1e5, seed=1) runs twice through the CLI command; the
second run only feeds the determinism check.  Each test records its
criterion number and a one-line verdict that ``conftest.py`` prints in the
terminal summary.
"""
import json
import math
import time

import numpy as np
import pytest

from orbitmean.bias import estimate_frechet_norm, estimate_K, oracle_mean_known_transforms
from orbitmean.cli import cmd_experiment, load_config
from orbitmean.group import register_exhaustive, register_fft
from orbitmean.maxmax import maxmax_step, multi_start, run_maxmax
from orbitmean.model import TemplateSpec, make_template, sample_dataset
from orbitmean.oracle import (analytic_gradient, approx_gradient_step, brute_force_frechet,
                              circle_grid_K, finite_difference_variance_grad)
from orbitmean.quotient import prepare, quotient_distance

# criterion 1
REG_PAIRS = 10_000
REG_NS = (4, 8, 64)
REG_MIN_MARGIN = 1e-8
REG_DIST_RTOL = 1e-9
REG_SECONDS = 10.0
# criterion 2
MM_DATASETS = 100
MM_SIGMAS = (0.1, 1.0, 10.0)
MM_MAX_STEPS = 10_000
MM_STEP_FRACTION = 0.1  # "well under max_steps"
MONOTONE_RTOL = 1e-12
MM_SECONDS = 60.0
# criterion 3
GS_STATES = 100
GS_ATOL = 1e-12
GS_SECONDS = 5.0
# criterion 4
FD_POINTS = 50
FD_RTOL = 1e-6
FD_SECONDS = 30.0
# criterion 5
TINY_DATASETS = 50
TINY_STARTS = 20
TINY_ATOL = 1e-12
TINY_SECONDS = 60.0
# criteria 6-8, 10, 13
N_PERTURB = 100
STEP_RANGE = (20, 300)
EB_RANGE_STEP = (0.05, 0.20)
SEPARATION_SE = 6.0
EXPERIMENT_SECONDS = 300.0
# criterion 9
SMOOTH_I = 1000
SMOOTH_SIGMA = 10.0
EB_RANGE_SMOOTH = (0.10, 0.40)
EB_ORACLE_MAX = 0.05
SMOOTH_SECONDS = 30.0
# criteria 10 and 11
K_N_MC = 100_000
SLACK_SE = 3.0
SLACK_SIGMA = 0.05
K2_SE = 3.0
SANDWICH_SECONDS = 180.0
# criterion 11
APPX_N, APPX_SIGMA, APPX_I = 8, 5.0, 100_000
APPX_SE = 3.0
# criterion 12
SWEEP_SIGMAS = (20.0, 40.0, 80.0)
SWEEP_I = 10_000
SWEEP_SECONDS = 300.0

ARTIFACTS = ("report.json", "trace.csv", "certificate.json", "signals.csv")


class Criterion:
    def __init__(self, record_property, n):
        self.record = record_property
        self.n = n
        self.t0 = time.perf_counter()
        record_property("criterion", n)

    def elapsed(self):
        return time.perf_counter() - self.t0

    def verdict(self, ok, detail):
        self.record("detail", detail)
        print("criterion %d: %s  %s" % (self.n, "PASS" if ok else "FAIL", detail))
        assert ok, detail


@pytest.fixture
def criterion(record_property):
    return lambda n: Criterion(record_property, n)


@pytest.fixture(scope="module")
def step_runs(tmp_path_factory):
    runs = []
    for name in ("step_a", "step_b"):
        out = tmp_path_factory.mktemp(name)
        cfg = load_config(overrides={"out": str(out), "n_perturb": N_PERTURB,
                                     "k_n_mc": K_N_MC})
        t = time.perf_counter()
        code = cmd_experiment(cfg)
        runs.append({"out": out, "code": code, "seconds": time.perf_counter() - t,
                     "report": json.loads((out / "report.json").read_text())})
    return runs


@pytest.fixture(scope="module")
def step_report(step_runs):
    return step_runs[0]["report"]


def test_criterion_01_registration_oracle(criterion):
    c = criterion(1)
    rng = np.random.default_rng(101)
    mismatched, worst, used = 0, 0.0, 0
    for n in REG_NS:
        for _ in range(REG_PAIRS):
            x, y = rng.standard_normal((2, n))
            a = register_exhaustive(x, y)
            if a.margin <= REG_MIN_MARGIN:
                continue
            b = register_fft(x, y)
            used += 1
            mismatched += a.element != b.element
            worst = max(worst, abs(a.distance - b.distance) / max(a.distance, 1e-300))
    t = c.elapsed()
    c.verdict(mismatched == 0 and worst <= REG_DIST_RTOL and t < REG_SECONDS,
              "%d pairs, %d element mismatches, max rel distance gap %.1e, %.1fs"
              % (used, mismatched, worst, t))


def test_criterion_02_monotone_finite_maxmax(criterion):
    c = criterion(2)
    rng = np.random.default_rng(202)
    bad_monotone, not_converged, max_steps = 0, 0, 0
    for d in range(MM_DATASETS):
        n = int(rng.integers(2, 17))
        size = int(rng.integers(1, 51))
        sigma = MM_SIGMAS[d % len(MM_SIGMAS)]
        t0 = rng.standard_normal(n)
        ds = sample_dataset(t0, sigma, size, seed=int(rng.integers(2**31)))
        res = run_maxmax(ds, max_steps=MM_MAX_STEPS)
        h = np.array(res.variance_history)
        bad_monotone += bool(np.any(h[1:] > h[:-1] * (1 + MONOTONE_RTOL)))
        not_converged += not res.converged
        max_steps = max(max_steps, res.steps)
    t = c.elapsed()
    ok = (bad_monotone == 0 and not_converged == 0
          and max_steps <= MM_STEP_FRACTION * MM_MAX_STEPS and t < MM_SECONDS)
    c.verdict(ok, "%d datasets, %d non-monotone, %d not converged, max steps %d, %.1fs"
              % (MM_DATASETS, bad_monotone, not_converged, max_steps, t))


def test_criterion_03_gradient_step_identity(criterion):
    c = criterion(3)
    rng = np.random.default_rng(303)
    worst = 0.0
    for _ in range(GS_STATES):
        n = int(rng.integers(2, 17))
        Y = rng.standard_normal((int(rng.integers(1, 31)), n)) * rng.uniform(0.1, 10)
        m = rng.standard_normal(n)
        a, _ = maxmax_step(m, Y, check=False)
        b = approx_gradient_step(m, Y, 0.5)
        worst = max(worst, float(np.max(np.abs(a - b))))
    t = c.elapsed()
    c.verdict(worst <= GS_ATOL and t < GS_SECONDS,
              "%d states, max componentwise gap %.1e, %.1fs" % (GS_STATES, worst, t))


def test_criterion_04_finite_differences(criterion):
    c = criterion(4)
    rng = np.random.default_rng(404)
    worst, found, tried = 0.0, 0, 0
    while found < FD_POINTS and tried < 20 * FD_POINTS:
        tried += 1
        n = int(rng.integers(2, 9))
        Y = rng.standard_normal((int(rng.integers(1, 21)), n))
        m = rng.standard_normal(n)
        fd, ok = finite_difference_variance_grad(m, Y)
        if not ok:
            continue
        found += 1
        g = analytic_gradient(m, Y)
        worst = max(worst, float(np.max(np.abs(fd - g)) / (1 + np.linalg.norm(g))))
    t = c.elapsed()
    c.verdict(found == FD_POINTS and worst <= FD_RTOL and t < FD_SECONDS,
              "%d regular points (%d drawn), max scaled gap %.1e, %.1fs"
              % (found, tried, worst, t))


def test_criterion_05_tiny_global_optimality(criterion):
    c = criterion(5)
    rng = np.random.default_rng(505)
    beaten, moved = 0, 0
    for d in range(TINY_DATASETS):
        size, n = (2, 3)[d % 2], (4, 6)[(d // 2) % 2]
        Y = rng.standard_normal((size, n))
        m, f, _ = brute_force_frechet(Y)
        runs = multi_start(Y, TINY_STARTS, rng_seed=d)
        beaten += sum(r.variance < f - TINY_ATOL for r in runs)
        stay = run_maxmax(Y, m0=m)
        moved += not (np.allclose(stay.estimate, m, rtol=0, atol=TINY_ATOL)
                      and abs(stay.variance - f) <= TINY_ATOL)
    t = c.elapsed()
    c.verdict(beaten == 0 and moved == 0 and t < TINY_SECONDS,
              "%d datasets, %d local results below the global value, %d moved, %.1fs"
              % (TINY_DATASETS, beaten, moved, t))


def test_criterion_06_karcher_certificate(criterion, step_report):
    c = criterion(6)
    cert = step_report["certificate"]
    ok = (cert["all_unique"] and cert["perturbation_checked"]
          and cert["n_perturb"] == N_PERTURB and cert["n_passed"] == N_PERTURB)
    c.verdict(ok, "all unique %s, %d/%d perturbations passed at radius %.2e"
              % (cert["all_unique"], cert["n_passed"], cert["n_perturb"],
                 cert["perturbation_radius"]))


def test_criterion_07_step_experiment(criterion, step_runs, step_report):
    c = criterion(7)
    r = step_report
    steps_ok = STEP_RANGE[0] <= r["steps"] <= STEP_RANGE[1]
    eb_ok = EB_RANGE_STEP[0] <= r["EB_over_sigma"] <= EB_RANGE_STEP[1]
    t = step_runs[0]["seconds"]
    ok = r["converged"] and steps_ok and eb_ok and t < EXPERIMENT_SECONDS
    c.verdict(ok, "converged %s, steps %d (range %d-%d), EB/sigma %.4f, %.0fs"
              % (r["converged"], r["steps"], STEP_RANGE[0], STEP_RANGE[1],
                 r["EB_over_sigma"], t))


def test_criterion_08_variance_separation(criterion, step_report):
    c = criterion(8)
    r = step_report
    gap = r["F_I_template"] - r["F_I_estimate"]
    se = math.hypot(r["F_I_template_se"], r["F_I_estimate_se"])
    c.verdict(gap > SEPARATION_SE * se,
              "F_I(t0) - F_I(m_hat) = %.4f, %.1f combined standard errors" % (gap, gap / se))


def test_criterion_09_smooth_template(criterion):
    c = criterion(9)
    t0 = make_template(TemplateSpec(kind="smooth"))
    ds = sample_dataset(t0, SMOOTH_SIGMA, SMOOTH_I, seed=1)
    res = run_maxmax(ds)
    eb = quotient_distance(t0, res.estimate) / SMOOTH_SIGMA
    eb_oracle = quotient_distance(t0, oracle_mean_known_transforms(ds)) / SMOOTH_SIGMA
    t = c.elapsed()
    ok = (res.converged and EB_RANGE_SMOOTH[0] <= eb <= EB_RANGE_SMOOTH[1]
          and eb_oracle <= EB_ORACLE_MAX and t < SMOOTH_SECONDS)
    c.verdict(ok, "EB/sigma max-max %.4f, oracle %.4f, %.1fs" % (eb, eb_oracle, t))


def test_criterion_10_bias_sandwich(criterion, step_report):
    c = criterion(10)
    r = step_report
    K, se, sigma = r["K"]["value"], r["K"]["std_error"], r["sigma"]
    slack = SLACK_SE * sigma * se + SLACK_SIGMA * sigma
    lo = sigma * K - 2 * r["template_norm"] - slack
    hi = sigma * K + 2 * r["template_norm"] + slack
    sandwich = lo <= r["EB"] <= hi
    k_range = 0 < K <= 1 + 3 * se
    k2 = estimate_K(2, n_mc=K_N_MC, seed=2)
    g_val, g_se, _ = circle_grid_K(n_mc=K_N_MC)
    k2_ok = abs(k2.value - g_val) <= K2_SE * math.hypot(k2.std_error, g_se)
    t = c.elapsed()
    c.verdict(sandwich and k_range and k2_ok and t < SANDWICH_SECONDS,
              "EB %.3f in [%.3f, %.3f]; K(64) %.4f +- %.4f; K(2) %.4f vs grid %.4f "
              "(1/sqrt(pi) = %.4f), %.1fs"
              % (r["EB"], lo, hi, K, se, k2.value, g_val, 1 / math.sqrt(math.pi), t))


def test_criterion_11_norm_characterisation(criterion):
    c = criterion(11)
    t0 = make_template(TemplateSpec(kind="step", n=APPX_N, start=2, length=2))
    ds = sample_dataset(t0, APPX_SIGMA, APPX_I, seed=1)
    p = prepare(ds)
    res = run_maxmax(p)
    norm = float(np.linalg.norm(res.estimate))
    # delta-method standard error of ||m_hat||
    u = res.estimate / norm
    _, _, Z = p.registered(res.estimate)
    norm_se = float((Z @ u).std(ddof=1) / math.sqrt(APPX_I))
    h = estimate_frechet_norm(t0, APPX_SIGMA, n_mc=K_N_MC, seed=3)
    K = estimate_K(APPX_N, n_mc=K_N_MC, seed=4)
    agree = abs(norm - h.value) <= (APPX_SE * math.hypot(norm_se, h.std_error)
                                    + SLACK_SIGMA * APPX_SIGMA)
    slack = SLACK_SE * APPX_SIGMA * K.std_error + SLACK_SIGMA * APPX_SIGMA
    tn = float(np.linalg.norm(t0))
    lo, hi = APPX_SIGMA * K.value - tn - slack, APPX_SIGMA * K.value + tn + slack
    t = c.elapsed()
    c.verdict(res.converged and agree and lo <= norm <= hi and t < SANDWICH_SECONDS,
              "||m_hat|| %.4f +- %.4f, sup h %.4f +- %.4f, band [%.3f, %.3f], %.1fs"
              % (norm, norm_se, h.value, h.std_error, lo, hi, t))


def test_criterion_12_linear_asymptote(criterion, step_report):
    c = criterion(12)
    K = step_report["K"]["value"]
    t0 = make_template(TemplateSpec())
    gaps = []
    for sigma in SWEEP_SIGMAS:
        ds = sample_dataset(t0, sigma, SWEEP_I, seed=1)
        res = run_maxmax(ds)
        gaps.append(abs(quotient_distance(t0, res.estimate) / sigma - K))
    t = c.elapsed()
    ok = all(b < a for a, b in zip(gaps, gaps[1:])) and t < SWEEP_SECONDS
    c.verdict(ok, "|EB/sigma - K| at sigma %s: %s, %.1fs"
              % ("/".join("%g" % s for s in SWEEP_SIGMAS),
                 ", ".join("%.4f" % g for g in gaps), t))


def test_criterion_13_determinism(criterion, step_runs):
    c = criterion(13)
    a, b = step_runs[0]["out"], step_runs[1]["out"]
    differ = [f for f in ARTIFACTS if (a / f).read_bytes() != (b / f).read_bytes()]
    svg_a = (a / "overlay.svg").read_text().splitlines()
    svg_b = (b / "overlay.svg").read_text().splitlines()
    strip = [ln for ln in svg_a if not ln.startswith("<!-- orbitmean")]
    if strip != [ln for ln in svg_b if not ln.startswith("<!-- orbitmean")]:
        differ.append("overlay.svg")
    codes = (step_runs[0]["code"], step_runs[1]["code"])
    c.verdict(not differ, "artifacts differing: %s; exit codes %s"
              % (", ".join(differ) or "none", codes))
