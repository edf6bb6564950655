import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orbitmean.maxmax import (certificate_json, maxmax_step, multi_start, register_all,
                              run_maxmax, start_point, verify_karcher, write_trace_csv)
from orbitmean.model import TemplateSpec, make_template, sample_dataset
from orbitmean.oracle import analytic_gradient, brute_force_frechet, exhaustive_variance
from orbitmean.quotient import empirical_variance, prepare, quotient_distance


@pytest.fixture(scope="module")
def small():
    t0 = make_template(TemplateSpec(n=16, start=4, length=4))
    return sample_dataset(t0, 1.0, 400, seed=2)


@pytest.fixture(scope="module")
def small_run(small):
    return run_maxmax(small)


def test_single_observation_collapses():
    y = np.random.default_rng(0).standard_normal(8)
    res = run_maxmax(y[None, :])
    assert res.converged and res.steps == 1
    assert np.array_equal(res.estimate, y)
    assert res.variance == 0.0


def test_noiseless_from_template_is_immediate():
    t0 = make_template(TemplateSpec())
    ds = sample_dataset(t0, 0.0, 300, seed=1)
    res = run_maxmax(ds, m0=t0)
    assert res.converged and res.steps == 1
    assert np.array_equal(res.estimate, t0)
    assert res.variance == 0.0
    # the registrations undo the hidden shifts
    assert np.array_equal(res.registration_final, (64 - ds.phi) % 64)


def test_converged_run_properties(small, small_run):
    res = small_run
    assert res.converged and res.steps >= 1
    assert len(res.variance_history) == res.steps + 1
    assert res.changed_history[-1] == 0
    h = np.array(res.variance_history)
    assert np.all(np.diff(h) <= 1e-12 * h[:-1])
    assert res.variance == pytest.approx(empirical_variance(res.estimate, small).value,
                                         rel=1e-12)
    # the estimate is the mean of the data under the final registration
    assert np.array_equal(res.estimate, start_point(small, res.registration_final))
    assert np.array_equal(register_all(res.estimate, small), res.registration_final)


def test_fixed_point_is_idempotent(small, small_run):
    again = run_maxmax(small, m0=small_run.estimate)
    assert again.converged and again.steps == 1
    assert np.array_equal(again.estimate, small_run.estimate)
    m1, ks = maxmax_step(small_run.estimate, small)
    assert np.array_equal(m1, small_run.estimate)


def test_estimate_is_a_critical_point(small, small_run):
    g = analytic_gradient(small_run.estimate, small)
    assert np.linalg.norm(g) < 1e-10 * (1 + np.linalg.norm(small_run.estimate))


def test_certificate_at_estimate(small, small_run):
    cert = verify_karcher(small_run.estimate, small, n_perturb=50)
    assert cert.all_unique and cert.perturbation_checked
    assert cert.n_passed == 50 and cert.is_local_minimum
    assert cert.perturbation_radius > 0
    # no registration moves within the certified radius
    rng = np.random.default_rng(3)
    for _ in range(10):
        u = rng.standard_normal(small.n)
        m = small_run.estimate + 0.99 * cert.perturbation_radius * u / np.linalg.norm(u)
        assert np.array_equal(register_all(m, small), small_run.registration_final)


def test_tiny_perturbation_is_continuous(small, small_run):
    res = run_maxmax(small, m0=small_run.estimate + 1e-10)
    assert np.array_equal(res.registration_final, small_run.registration_final)
    assert np.allclose(res.estimate, small_run.estimate, atol=1e-12)


def test_focal_point_counterexample():
    y = np.array([1.0, -2.0, 0.5, 3.0])
    Y = np.stack([y, -y])
    res = run_maxmax(Y, m0=np.zeros(4))
    assert res.converged
    assert np.array_equal(res.estimate, np.zeros(4))
    cert = verify_karcher(res.estimate, Y)
    assert not cert.all_unique and cert.n_non_unique == 2
    assert not cert.perturbation_checked and not cert.is_local_minimum


def test_step_cap_reports_non_convergence(small, small_run):
    assert small_run.steps >= 2
    res = run_maxmax(small, max_steps=1)
    assert res.steps == 1 and not res.converged
    assert len(res.variance_history) == 2
    with pytest.raises(ValueError):
        run_maxmax(small, max_steps=0)


def test_multi_start(small, small_run):
    runs = multi_start(small, n_starts=5, rng_seed=1)
    assert sorted(r.start_id for r in runs) == list(range(5))
    v = [r.variance for r in runs]
    assert v == sorted(v)
    first = [r for r in runs if r.start_id == 0][0]
    assert np.array_equal(first.estimate, small_run.estimate)
    again = multi_start(small, n_starts=5, rng_seed=1)
    assert [r.variance for r in again] == v
    with pytest.raises(ValueError):
        multi_start(small, n_starts=0)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_never_beats_the_global_minimum(seed):
    rng = np.random.default_rng(seed)
    Y = rng.standard_normal((4, 5))
    _, fbest, _ = brute_force_frechet(Y)
    res = run_maxmax(Y)
    assert exhaustive_variance(res.estimate, Y) >= fbest - 1e-12
    h = np.array(res.variance_history)
    assert np.all(np.diff(h) <= 1e-12 * h[:-1])


def test_multistart_finds_global_on_tiny_instance():
    rng = np.random.default_rng(9)
    Y = rng.standard_normal((4, 5))
    _, fbest, _ = brute_force_frechet(Y)
    best = multi_start(Y, n_starts=40, rng_seed=0)[0]
    assert best.variance == pytest.approx(fbest, rel=1e-10)


def test_trace_and_certificate_io(tmp_path, small, small_run):
    write_trace_csv(small_run, tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "step,F_I,n_registrations_changed,n_ties"
    assert len(lines) == small_run.steps + 2
    assert float(lines[-1].split(",")[1]) == small_run.variance
    cert = verify_karcher(small_run.estimate, prepare(small), n_perturb=5)
    certificate_json(cert, tmp_path / "c.json")
    d = json.loads((tmp_path / "c.json").read_text())
    assert d["schema_version"] == 1 and d["is_local_minimum"] and d["n_perturb"] == 5


def test_distinct_local_minima_on_step_data():
    t0 = make_template(TemplateSpec())
    ds = sample_dataset(t0, 10.0, 500, seed=1)
    runs = multi_start(ds, n_starts=20, rng_seed=1)
    assert all(r.converged for r in runs)
    assert len({r.variance for r in runs}) >= 2
    assert quotient_distance(runs[0].estimate, runs[-1].estimate) > 1e-6
    assert runs[0].variance <= [r for r in runs if r.start_id == 0][0].variance
