"""
Quotient pseudometric and the empirical variance in the quotient space.

``F_I(x) = (1/I) sum_i min_g ||x - g . Y_i||^2``.  The population variance
is never available in closed form; every estimate carries a standard error.
"""
import csv
from dataclasses import dataclass

import numpy as np

from .group import apply_batch, as_signal, register_batch, register_fft, shift_windows

__all__ = [
    "Prepared",
    "prepare",
    "VarianceEstimate",
    "quotient_distance",
    "squared_distances",
    "empirical_variance",
    "variance_difference",
    "variance_curve",
    "log_checkpoints",
    "write_curve_csv",
]


class Prepared:
    """Observations with their spectra, norms and shift windows cached.

    Every routine that registers a whole dataset accepts either a
    :class:`~orbitmean.model.Dataset` or one of these; iterative callers
    prepare once and reuse.
    """

    def __init__(self, Y):
        Y = np.ascontiguousarray(Y, dtype=float)
        if Y.ndim != 2 or Y.shape[0] == 0:
            raise ValueError("expected a non-empty (I, N) array of observations")
        self.Y = Y
        self.Yf = np.fft.rfft(Y, axis=1)
        self.norms = np.linalg.norm(Y, axis=1)
        self.windows = shift_windows(Y)

    @property
    def size(self):
        return self.Y.shape[0]

    @property
    def n(self):
        return self.Y.shape[1]

    def register(self, x):
        """``(ks, margins)`` registering every observation onto ``x``."""
        x = as_signal(x, self.n)
        return register_batch(x, self.Y, self.Yf, self.norms)

    def align(self, ks):
        return apply_batch(ks, self.Y, self.windows)

    def registered(self, x):
        ks, margins = self.register(x)
        return ks, margins, self.align(ks)


def prepare(ds):
    if isinstance(ds, Prepared):
        return ds
    Y = ds.Y if hasattr(ds, "Y") else ds
    if len(Y) == 0:
        raise ValueError("empty dataset")
    return Prepared(Y)


@dataclass(frozen=True)
class VarianceEstimate:
    value: float
    std_error: float
    n: int


def quotient_distance(x, y):
    """``min_g ||x - g . y||``, the distance between the orbits of x and y."""
    return register_fft(x, y).distance


def squared_distances(x, ds):
    """Per-observation ``d_Q^2([x], [Y_i])``, computed directly after alignment."""
    p = prepare(ds)
    x = as_signal(x, p.n)
    _, _, Z = p.registered(x)
    return np.sum((Z - x[None, :]) ** 2, axis=1)


def _estimate(d):
    n = d.size
    if n == 0:
        raise ValueError("empty dataset")
    se = float(d.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return VarianceEstimate(float(d.mean()), se, n)


def empirical_variance(x, ds):
    """Empirical quotient variance ``F_I(x)`` with its standard error."""
    return _estimate(squared_distances(x, ds))


def variance_difference(a, m, ds):
    """``F_I(a) - F_I(m)`` with its paired standard error.

    Each term ``||a - z_i||^2 - ||m - w_i||^2`` is factored into a product of
    a difference and a sum, which stays accurate when ``a`` is very close to
    ``m``.
    """
    p = prepare(ds)
    a = as_signal(a, p.n)
    m = as_signal(m, p.n)
    _, _, Za = p.registered(a)
    _, _, Zm = p.registered(m)
    ra = a[None, :] - Za
    rm = m[None, :] - Zm
    return _estimate(np.sum((ra - rm) * (ra + rm), axis=1))


def log_checkpoints(total, per_decade=10, start=10):
    """Roughly log-spaced sample sizes from ``start`` to ``total`` inclusive."""
    if total < 1:
        raise ValueError("total must be positive")
    start = min(start, total)
    decades = np.log10(total / start) if total > start else 0.0
    npts = max(int(np.ceil(decades * per_decade)) + 1, 1)
    pts = np.unique(np.round(np.logspace(np.log10(start), np.log10(total), npts)).astype(int))
    pts = pts[(pts >= 1) & (pts <= total)]
    if pts[-1] != total:
        pts = np.append(pts, total)
    return [int(p) for p in pts]


def variance_curve(points, ds, checkpoints, labels=None):
    """``F_{I'}`` of each point on the first ``I'`` observations, per checkpoint.

    One registration pass per point; every checkpoint reuses the prefix of
    the same per-observation squared distances, in dataset order.

    Returns
    -------
    list of dict
        Rows with keys ``I``, ``label``, ``F_I``, ``std_error``.
    """
    p = prepare(ds)
    checkpoints = [int(c) for c in checkpoints]
    if any(b <= a for a, b in zip(checkpoints, checkpoints[1:])):
        raise ValueError("checkpoints must be strictly increasing")
    if checkpoints and (checkpoints[0] < 1 or checkpoints[-1] > p.size):
        raise ValueError("checkpoint outside [1, %d]" % p.size)
    if labels is None:
        labels = ["p%d" % j for j in range(len(points))]
    dists = [squared_distances(x, p) for x in points]
    rows = []
    for c in checkpoints:
        for label, d2 in zip(labels, dists):
            est = _estimate(d2[:c])
            rows.append({"I": c, "label": label, "F_I": est.value,
                         "std_error": est.std_error})
    return rows


def write_curve_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["I", "point_label", "F_I", "std_error"])
        for r in rows:
            w.writerow([r["I"], r["label"], "%.17g" % r["F_I"], "%.17g" % r["std_error"]])
