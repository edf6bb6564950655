"""
The max-max algorithm: alternating minimisation of

    J(x, g) = (1/I) sum_i ||x - g_i . Y_i||^2

over the template ``x`` (closed form: the mean of the registered data) and
the registrations ``g`` (one FFT registration per observation).

The run stops as soon as the registration vector repeats, which is exact
and equivalent to ``m_{n+1} == m_n`` since the mean is a function of ``g``.
"""
import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .group import UNIQUE_RTOL, as_signal
from .quotient import prepare, variance_difference

__all__ = [
    "KarcherCertificate",
    "MaxMaxResult",
    "register_all",
    "maxmax_step",
    "start_point",
    "run_maxmax",
    "verify_karcher",
    "multi_start",
    "write_trace_csv",
    "certificate_json",
]

DEFAULT_MAX_STEPS = 10_000
# relative slack on the monotonicity assertion, for summation roundoff only
MONOTONE_RTOL = 1e-12


@dataclass
class KarcherCertificate:
    """Evidence that ``m`` is a local minimum of ``F_I``.

    ``margins`` are the per-observation squared-distance gaps between the
    best and second-best registration.  The perturbation test is only run
    when every registration is unique.
    """

    margins: np.ndarray
    all_unique: bool
    n_non_unique: int = 0
    perturbation_checked: bool = False
    perturbation_radius: float = 0.0
    n_perturb: int = 0
    n_passed: int = 0
    min_increase: float = float("nan")

    @property
    def is_local_minimum(self):
        return (self.all_unique and self.perturbation_checked
                and self.n_passed == self.n_perturb)

    def to_dict(self):
        return {
            "schema_version": 1,
            "n_observations": int(self.margins.size),
            "min_margin": float(self.margins.min()) if self.margins.size else None,
            "n_non_unique": int(self.n_non_unique),
            "all_unique": bool(self.all_unique),
            "perturbation_checked": bool(self.perturbation_checked),
            "perturbation_radius": float(self.perturbation_radius),
            "n_perturb": int(self.n_perturb),
            "n_passed": int(self.n_passed),
            "min_increase": None if np.isnan(self.min_increase) else float(self.min_increase),
            "is_local_minimum": bool(self.is_local_minimum),
        }


@dataclass
class MaxMaxResult:
    estimate: np.ndarray
    steps: int
    variance_history: list
    registration_final: np.ndarray
    converged: bool
    certificate: KarcherCertificate = None
    changed_history: list = field(default_factory=list)
    tie_history: list = field(default_factory=list)
    start_id: int = 0

    @property
    def variance(self):
        return self.variance_history[-1]


def _margin_tol(m, norms):
    return 2.0 * UNIQUE_RTOL * np.linalg.norm(m) * norms


def register_all(m, ds):
    """Shift registering each observation onto ``m`` (smallest index on ties)."""
    ks, _ = prepare(ds).register(m)
    return ks


def _variance(m, Z):
    return float(np.mean(np.sum((Z - m[None, :]) ** 2, axis=1)))


def maxmax_step(m, ds, check=True):
    """One iteration: register every observation onto ``m``, then average.

    Returns ``(m_next, ks)``.  With ``check`` the step verifies that the
    empirical variance did not increase.
    """
    p = prepare(ds)
    m = as_signal(m, p.n)
    ks, _, Z = p.registered(m)
    m_next = Z.mean(axis=0)
    if check:
        f_before = _variance(m, Z)
        f_after = _variance(m_next, p.registered(m_next)[2])
        if f_after > f_before * (1 + MONOTONE_RTOL):
            raise AssertionError("variance increased: %r -> %r" % (f_before, f_after))
    return m_next, ks


def start_point(ds, shifts=None):
    """``(1/I) sum_i g_i . Y_i``; all ``g_i = e`` when ``shifts`` is None."""
    p = prepare(ds)
    if shifts is None:
        return p.Y.mean(axis=0)
    return p.align(shifts).mean(axis=0)


def run_maxmax(ds, m0=None, max_steps=DEFAULT_MAX_STEPS):
    """Run max-max until the registration vector repeats.

    Parameters
    ----------
    ds : Dataset or Prepared
    m0 : array_like, optional
        Starting point; defaults to the plain mean of the observations.
    max_steps : int
        Cap on the number of averaging steps.  Hitting it is reported through
        ``converged=False``, never raised.

    Returns
    -------
    MaxMaxResult
        ``variance_history[n]`` is ``F_I`` at the ``n``-th iterate; the
        estimate is the last iterate and ``steps`` counts averaging updates.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be at least 1")
    p = prepare(ds)
    m = start_point(p) if m0 is None else as_signal(m0, p.n).copy()

    history, changed, ties = [], [], []
    prev = None
    converged = False
    steps = 0
    while True:
        ks, margins, Z = p.registered(m)
        history.append(_variance(m, Z))
        ties.append(int(np.sum(margins <= _margin_tol(m, p.norms))))
        if prev is None:
            changed.append(p.size)
        else:
            changed.append(int(np.sum(ks != prev)))
            if changed[-1] == 0:
                converged = True
                break
        if steps >= max_steps:
            break
        m = Z.mean(axis=0)
        prev = ks
        steps += 1
    for a, b in zip(history, history[1:]):
        if b > a * (1 + MONOTONE_RTOL):
            raise AssertionError("variance increased: %r -> %r" % (a, b))
    return MaxMaxResult(m, steps, history, ks, converged,
                        changed_history=changed, tie_history=ties)


def verify_karcher(m, ds, n_perturb=100, rng_seed=0):
    """Certify ``m`` as a local minimum of the empirical variance.

    Every registration must be unique; then ``n_perturb`` random points at
    distance ``r`` from ``m`` must not lower ``F_I``, where ``r`` is half the
    smallest gap between best and second-best registered distance (floored
    at ``1e-12 ||m||``).  Within that radius no registration can switch.
    """
    p = prepare(ds)
    m = as_signal(m, p.n)
    ks, margins, Z = p.registered(m)
    unique = margins > _margin_tol(m, p.norms)
    cert = KarcherCertificate(margins, bool(np.all(unique)),
                              n_non_unique=int(np.sum(~unique)))
    if not cert.all_unique:
        return cert
    d1 = np.linalg.norm(Z - m, axis=1)
    gaps = margins / (np.sqrt(d1 * d1 + margins) + d1)
    r = max(gaps.min() / 2.0, 1e-12 * np.linalg.norm(m))
    rng = np.random.default_rng(rng_seed)
    incs = np.empty(n_perturb)
    for j in range(n_perturb):
        u = rng.standard_normal(m.size)
        incs[j] = variance_difference(m + r * u / np.linalg.norm(u), m, p).value
    cert.perturbation_checked = True
    cert.perturbation_radius = float(r)
    cert.n_perturb = n_perturb
    cert.n_passed = int(np.sum(incs >= 0.0))
    cert.min_increase = float(incs.min()) if n_perturb else float("nan")
    return cert


def multi_start(ds, n_starts=20, rng_seed=0, max_steps=DEFAULT_MAX_STEPS):
    """Run max-max from ``n_starts`` starting points.

    The first start is the default (plain mean); the others average the
    observations under uniformly drawn shifts.  Results come back sorted by
    final empirical variance, each tagged with ``start_id``.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be at least 1")
    p = prepare(ds)
    rng = np.random.default_rng(rng_seed)
    results = []
    for s in range(n_starts):
        if s == 0:
            m0 = start_point(p)
        else:
            m0 = start_point(p, rng.integers(0, p.n, p.size))
        res = run_maxmax(p, m0, max_steps)
        res.start_id = s
        results.append(res)
    results.sort(key=lambda r: (r.variance, r.start_id))
    return results


def write_trace_csv(result, path):
    """Run trace: one row per iterate (step, F_I, registrations changed, ties)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "F_I", "n_registrations_changed", "n_ties"])
        for n, (f, c, t) in enumerate(zip(result.variance_history,
                                          result.changed_history,
                                          result.tie_history)):
            w.writerow([n, "%.17g" % f, c, t])


def certificate_json(cert, path):
    with open(path, "w") as fh:
        json.dump(cert.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
