"""
Brute-force references for the test suite.

Nothing here uses the FFT registration path: distances are enumerated over
the whole orbit so these routines stay independent of what they check.
"""
import itertools

import numpy as np

from .group import as_signal, orbit
from .model import sample_noise

__all__ = [
    "exhaustive_squared_distances",
    "exhaustive_variance",
    "brute_force_frechet",
    "approx_gradient_step",
    "analytic_gradient",
    "registration_gaps",
    "finite_difference_variance_grad",
    "circle_grid_K",
]

MAX_CANDIDATES = 10**6


def _Y(ds):
    return ds.Y if hasattr(ds, "Y") else np.asarray(ds, dtype=float)


def exhaustive_squared_distances(m, ds):
    """``(d2, ks)``: min over all shifts of ``||m - g . Y_i||^2`` and the argmin."""
    Y = _Y(ds)
    m = as_signal(m, Y.shape[1])
    d2 = np.array([np.sum((orbit(y) - m[None, :]) ** 2, axis=1) for y in Y])
    ks = np.argmin(d2, axis=1)
    return d2[np.arange(len(Y)), ks], ks


def exhaustive_variance(m, ds):
    return float(exhaustive_squared_distances(m, ds)[0].mean())


def brute_force_frechet(ds):
    """Global minimiser of ``F_I`` by enumeration of the candidate means.

    Every max-max iterate is ``(1/I) sum_i g_i . Y_i``; fixing ``g_1 = e``
    loses nothing since ``F_I`` is constant on orbits.  Ties go to the
    lexicographically first shift vector.

    Returns
    -------
    (m, variance, shifts)
    """
    Y = _Y(ds)
    size, n = Y.shape
    if n ** (size - 1) > MAX_CANDIDATES:
        raise ValueError("instance too large: %d^%d candidates" % (n, size - 1))
    orbits = [orbit(y) for y in Y]
    best = (np.inf, None, None)
    for rest in itertools.product(range(n), repeat=size - 1):
        ks = (0,) + rest
        m = np.mean([orbits[i][k] for i, k in enumerate(ks)], axis=0)
        f = exhaustive_variance(m, Y)
        if f < best[0]:
            best = (f, m, ks)
    return best[1], best[0], np.array(best[2])


def approx_gradient_step(m, ds, rho):
    """``m (1 - 2 rho) + rho (2/I) sum_i g(Y_i, m) . Y_i``.

    The registrations are found by exhaustive search.  Non-unique
    registrations are tolerated; the smallest shift is used.
    """
    Y = _Y(ds)
    m = as_signal(m, Y.shape[1])
    _, ks = exhaustive_squared_distances(m, Y)
    aligned = np.array([orbit(y)[k] for y, k in zip(Y, ks)])
    return m * (1 - 2 * rho) + rho * (2.0 / len(Y)) * aligned.sum(axis=0)


def analytic_gradient(m, ds):
    """``2 (m - (1/I) sum_i g_i . Y_i)`` at a point with unique registrations."""
    Y = _Y(ds)
    m = as_signal(m, Y.shape[1])
    _, ks = exhaustive_squared_distances(m, Y)
    aligned = np.array([orbit(y)[k] for y, k in zip(Y, ks)])
    return 2.0 * (m - aligned.mean(axis=0))


def registration_gaps(m, ds):
    """Per-observation gap between second-best and best squared distance."""
    Y = _Y(ds)
    m = as_signal(m, Y.shape[1])
    d2 = np.sort(np.array([np.sum((orbit(y) - m[None, :]) ** 2, axis=1) for y in Y]), axis=1)
    return d2[:, 1] - d2[:, 0]


def finite_difference_variance_grad(m, ds, h=None):
    """Central-difference gradient of ``F_I`` at ``m``.

    Returns ``(grad, trustworthy)``; ``trustworthy`` is False when some
    registration gap is too small for a step of ``h`` to keep every
    registration fixed.  Defaults to ``h = 1e-5 (1 + ||m||)``.
    """
    Y = _Y(ds)
    m = as_signal(m, Y.shape[1])
    if h is None:
        h = 1e-5 * (1 + np.linalg.norm(m))
    gaps = registration_gaps(m, Y)
    d = np.linalg.norm(Y, axis=1) + np.linalg.norm(m)
    # a move of size h changes each squared distance by at most ~2 h d
    trustworthy = bool(np.all(gaps > 4.0 * h * d))
    grad = np.empty(m.size)
    for j in range(m.size):
        e = np.zeros(m.size)
        e[j] = h
        grad[j] = (exhaustive_variance(m + e, Y) - exhaustive_variance(m - e, Y)) / (2 * h)
    return grad, trustworthy


def circle_grid_K(n_mc=100_000, n_grid=3600, seed=12345):
    """``K`` for N=2 by a dense grid over the unit circle.

    Returns ``(value, std_error, theta)`` at the best grid angle; the group is
    ``{identity, swap}``, so ``max_g <g . v, eps>`` is the larger of
    ``<v, eps>`` and ``<v, swap(eps)>``.
    """
    eps = sample_noise(2, n_mc, seed)
    swapped = eps[:, ::-1]
    theta = np.linspace(0.0, 2.0 * np.pi, n_grid, endpoint=False)
    best = (-np.inf, 0.0, 0.0)
    for lo in range(0, n_grid, 256):
        th = theta[lo:lo + 256]
        V = np.stack([np.cos(th), np.sin(th)])
        vals = np.maximum(eps @ V, swapped @ V)
        means = vals.mean(axis=0)
        j = int(np.argmax(means))
        if means[j] > best[0]:
            se = vals[:, j].std(ddof=1) / np.sqrt(n_mc)
            best = (float(means[j]), float(se), float(th[j]))
    return best
