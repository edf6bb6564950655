"""
Cyclic shift action of Z/NZ on R^N and registration of signals.

A shift ``k`` acts on ``x`` by ``(k . x)[j] = x[(j + k) mod N]``, i.e. it is
``np.roll(x, -k)``.  The action is linear and isometric; its fixed points are
the constant signals.

Registering ``y`` with respect to ``x`` means finding the shift ``k`` that
minimises ``||x - k . y||``.  Since ``||x - k . y||^2 = ||x||^2 + ||y||^2 -
2 c[k]`` with ``c[k] = sum_j x[j] y[(j + k) mod N]``, this is an argmax over
the circular cross-correlation, which the FFT delivers in O(N log N).
"""
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "Shift",
    "Registration",
    "as_signal",
    "identity",
    "compose",
    "inverse",
    "apply",
    "apply_batch",
    "shift_windows",
    "orbit",
    "correlation",
    "correlation_batch",
    "register_exhaustive",
    "register_fft",
    "register_batch",
    "default_tol",
    "is_unique_registration",
    "is_fixed_point",
]

# correlation values closer than this (relative to ||x|| ||y||) count as ties
TIE_RTOL = 1e-12
# default uniqueness tolerance on <m, z - g.z>, relative to ||m|| ||y||
UNIQUE_RTOL = 1e-9


@dataclass(frozen=True)
class Shift:
    """Element ``k`` of the cyclic group Z/nZ."""

    k: int
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("modulus must be positive, got %d" % self.n)
        if not 0 <= self.k < self.n:
            raise ValueError("shift %d outside [0, %d)" % (self.k, self.n))

    def __int__(self):
        return self.k


@dataclass(frozen=True)
class Registration:
    """Result of aligning ``y`` onto ``x``.

    ``margin`` is the gap between the second-best and the best squared
    distance over the whole group (0 when the minimiser is not unique).
    """

    element: Shift
    distance: float
    margin: float
    unique: bool


def as_signal(x, n=None):
    """Validate and return ``x`` as a 1-d float array of finite values."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("signal must be 1-d, got shape %s" % (x.shape,))
    if x.size < 2:
        raise ValueError("signal length must be at least 2")
    if n is not None and x.size != n:
        raise ValueError("signal length %d does not match %d" % (x.size, n))
    if not np.all(np.isfinite(x)):
        raise ValueError("signal contains non-finite values")
    return x


def _check_pair(x, y):
    x = as_signal(x)
    y = as_signal(y)
    if x.size != y.size:
        raise ValueError("length mismatch: %d vs %d" % (x.size, y.size))
    return x, y


def _check_same_group(g, h):
    if g.n != h.n:
        raise ValueError("modulus mismatch: %d vs %d" % (g.n, h.n))


def identity(n):
    return Shift(0, n)


def compose(g, h):
    """Group product ``g h``: acting by it equals acting by ``h`` then ``g``."""
    _check_same_group(g, h)
    return Shift((g.k + h.k) % g.n, g.n)


def inverse(g):
    return Shift((g.n - g.k) % g.n, g.n)


def apply(g, x):
    """Act on ``x`` by the shift ``g``: ``out[j] = x[(j + g.k) mod N]``."""
    x = as_signal(x)
    if g.n != x.size:
        raise ValueError("shift modulus %d does not match signal length %d"
                         % (g.n, x.size))
    return x[(np.arange(x.size) + g.k) % x.size]


def shift_windows(Y):
    """Read-only view ``W`` with ``W[i, k] == Shift(k) . Y[i]``.

    Built once per dataset, it turns :func:`apply_batch` into a single gather.
    """
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[1]
    Y2 = np.concatenate([Y, Y[:, :n - 1]], axis=1)
    return sliding_window_view(Y2, n, axis=1)


def apply_batch(ks, Y, windows=None):
    """Row-wise action: ``out[i] = Shift(ks[i]) . Y[i]``."""
    ks = np.asarray(ks, dtype=np.int64)
    if windows is not None:
        return windows[np.arange(ks.size), ks]
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[1]
    idx = (np.arange(n)[None, :] + ks[:, None]) % n
    return np.take_along_axis(Y, idx, axis=1)


def orbit(x):
    """All ``N`` shifts of ``x`` as rows; row ``k`` is ``Shift(k) . x``."""
    x = as_signal(x)
    n = x.size
    return x[(np.arange(n)[:, None] + np.arange(n)[None, :]) % n]


def correlation(x, y):
    """Circular cross-correlation ``c[k] = <x, Shift(k) . y>`` via FFT."""
    x, y = _check_pair(x, y)
    return np.fft.irfft(np.conj(np.fft.rfft(x)) * np.fft.rfft(y), n=x.size)


def correlation_batch(x, Y, Yf=None):
    """Correlation of ``x`` against every row of ``Y``.

    ``Yf`` may carry a precomputed ``rfft(Y, axis=1)`` to skip the forward
    transform of the data.
    """
    n = Y.shape[1]
    if Yf is None:
        Yf = np.fft.rfft(Y, axis=1)
    return np.fft.irfft(np.conj(np.fft.rfft(x))[None, :] * Yf, n=n, axis=1)


def _argmax_ties(c, scale):
    """Index of the max of ``c`` along the last axis, smallest index on ties.

    Returns ``(k, best, runner_up)`` where ``runner_up`` is the largest value
    at an index other than ``k``.
    """
    c = np.atleast_2d(c)
    best = c.max(axis=1)
    tie = TIE_RTOL * np.maximum(scale, np.finfo(float).tiny)
    k = np.argmax(c >= (best - tie)[:, None], axis=1)
    rows = np.arange(c.shape[0])
    best = c[rows, k]
    others = c.copy()
    others[rows, k] = -np.inf
    runner_up = others.max(axis=1)
    return k, best, runner_up


def default_tol(m, y):
    """Scale-relative uniqueness tolerance on ``<m, z - g.z>``."""
    return UNIQUE_RTOL * np.linalg.norm(m) * np.linalg.norm(y)


def register_exhaustive(x, y, tol=None):
    """Register ``y`` onto ``x`` by trying every shift.

    Parameters
    ----------
    x, y : array_like, shape (N,)
        Reference and moving signal.
    tol : float, optional
        Uniqueness tolerance on ``<x, z - g.z>``; the registration is flagged
        unique when ``margin > 2 * tol``.  Defaults to ``default_tol(x, y)``.

    Returns
    -------
    Registration
        Ties are broken towards the smallest shift index.
    """
    x, y = _check_pair(x, y)
    d2 = np.sum((x[None, :] - orbit(y)) ** 2, axis=1)
    # smallest distance is the largest negated distance; reuse the tie logic
    k, best, runner_up = _argmax_ties(-d2, x @ x + y @ y)
    k = int(k[0])
    margin = max(float(best[0] - runner_up[0]), 0.0)
    if tol is None:
        tol = default_tol(x, y)
    return Registration(Shift(k, x.size), float(np.sqrt(d2[k])), margin,
                        bool(margin > 2.0 * tol))


def register_fft(x, y, tol=None):
    """Register ``y`` onto ``x`` through the FFT cross-correlation.

    Same contract as :func:`register_exhaustive`.  The distance is recomputed
    directly at the optimal shift so it stays accurate near zero.
    """
    x, y = _check_pair(x, y)
    c = correlation(x, y)
    scale = np.linalg.norm(x) * np.linalg.norm(y)
    k, best, runner_up = _argmax_ties(c, scale)
    k = int(k[0])
    margin = max(2.0 * float(best[0] - runner_up[0]), 0.0)
    if tol is None:
        tol = default_tol(x, y)
    dist = float(np.linalg.norm(x - apply(Shift(k, x.size), y)))
    return Registration(Shift(k, x.size), dist, margin, bool(margin > 2.0 * tol))


def register_batch(x, Y, Yf=None, norms=None):
    """Register every row of ``Y`` onto ``x``.

    ``Yf`` and ``norms`` may carry a precomputed ``rfft(Y, axis=1)`` and the
    row norms of ``Y``.

    Returns
    -------
    ks : ndarray of int, shape (I,)
        Optimal shifts, smallest index on ties.
    margins : ndarray, shape (I,)
        Squared-distance gap between the best and second-best shift.
    """
    c = correlation_batch(x, Y, Yf)
    if norms is None:
        norms = np.linalg.norm(Y, axis=1)
    ks, best, runner_up = _argmax_ties(c, np.linalg.norm(x) * norms)
    return ks, np.maximum(2.0 * (best - runner_up), 0.0)


def is_unique_registration(m, y, tol=None):
    """True iff ``<m, z - g.z>`` exceeds ``tol`` for every ``g != e``.

    ``z`` is the registration of ``y`` with respect to ``m``.  With ``m = 0``
    every shift is equally good and the answer is False.
    """
    m, y = _check_pair(m, y)
    if tol is None:
        tol = default_tol(m, y)
    reg = register_fft(m, y)
    z = apply(reg.element, y)
    gaps = m @ z - orbit(z)[1:] @ m
    return bool(np.all(np.abs(gaps) > tol))


def is_fixed_point(x, tol=0.0):
    """True iff ``||g.x - x|| <= tol`` for every shift ``g``."""
    x = as_signal(x)
    dev = np.linalg.norm(orbit(x) - x[None, :], axis=1)
    return bool(dev.max() <= tol)
