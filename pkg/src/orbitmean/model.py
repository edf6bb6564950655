"""
Templates and the generative model ``Y = phi . t0 + sigma * eps``.

``phi`` is uniform on the cyclic group and ``eps`` has i.i.d. centred
Gaussian coordinates of variance ``1/N``, so ``E||eps||^2 = 1`` and the
per-coordinate noise level is ``sigma / sqrt(N)``.

Sampling is reproducible: observations are drawn in fixed-size blocks, each
from its own ``numpy.random.SeedSequence`` child of the user seed.  A block's
content depends only on ``(seed, block index)``, so blocks can be produced
in any order or in parallel with identical results.
"""
import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .group import Shift, apply, apply_batch, as_signal, is_fixed_point

__all__ = [
    "TemplateSpec",
    "Observation",
    "Dataset",
    "make_template",
    "sample_noise",
    "sample_dataset",
    "empirical_moments",
    "save_dataset",
    "load_dataset",
]

BLOCK_SIZE = 4096


@dataclass
class TemplateSpec:
    """Recipe for a template signal.

    kind='step'    -> ``height`` on ``[start, start + length)``, 0 elsewhere.
    kind='smooth'  -> ``sum_f a_f cos(2 pi f j / N + phase_f)``.
    kind='custom'  -> explicit ``values``.
    """

    kind: str = "step"
    n: int = 64
    start: int = 16
    length: int = 16
    height: float = 1.0
    frequencies: list = field(default_factory=lambda: [1])
    amplitudes: list = field(default_factory=lambda: [1.0])
    phases: list = field(default_factory=list)
    values: list = field(default_factory=list)
    allow_fixed_point: bool = False

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def make_template(spec):
    """Build the template signal described by ``spec``."""
    n = spec.n
    if n < 2:
        raise ValueError("template length must be at least 2")
    if spec.kind == "step":
        if spec.length < 1 or spec.start < 0 or spec.start + spec.length > n:
            raise ValueError("step support [%d, %d) not inside [0, %d)"
                             % (spec.start, spec.start + spec.length, n))
        t = np.zeros(n)
        t[spec.start:spec.start + spec.length] = spec.height
    elif spec.kind == "smooth":
        if len(spec.frequencies) == 0:
            raise ValueError("smooth template needs at least one frequency")
        if len(spec.amplitudes) != len(spec.frequencies):
            raise ValueError("frequencies and amplitudes differ in length")
        phases = spec.phases or [0.0] * len(spec.frequencies)
        if len(phases) != len(spec.frequencies):
            raise ValueError("frequencies and phases differ in length")
        j = np.arange(n)
        t = np.zeros(n)
        for f, a, p in zip(spec.frequencies, spec.amplitudes, phases):
            t += a * np.cos(2.0 * np.pi * f * j / n + p)
        # exact zeros where cos is analytically zero, e.g. (1, 0, -1, 0)
        t[np.abs(t) < 1e-15 * max(1.0, np.abs(t).max())] = 0.0
    elif spec.kind == "custom":
        if len(spec.values) == 0:
            raise ValueError("custom template needs values")
        t = as_signal(spec.values, n)
    else:
        raise ValueError("unknown template kind %r" % spec.kind)
    if not spec.allow_fixed_point and is_fixed_point(t):
        raise ValueError("template is constant (a fixed point of the action); "
                         "set allow_fixed_point to override")
    return t


@dataclass(frozen=True)
class Observation:
    y: np.ndarray
    phi: Shift = None
    eps: np.ndarray = None
    sigma: float = 0.0


@dataclass
class Dataset:
    """I observations of one template, stored row-wise in ``Y``.

    ``phi`` and ``eps`` are the hidden shifts and noises; they are ``None``
    when the dataset was sampled with ``keep_hidden=False``.  ``phi`` alone
    survives a CSV round trip.
    """

    template: np.ndarray
    sigma: float
    Y: np.ndarray
    seed: int = None
    phi: np.ndarray = None
    eps: np.ndarray = None
    template_spec: TemplateSpec = None

    @property
    def size(self):
        return self.Y.shape[0]

    @property
    def n(self):
        return self.Y.shape[1]

    @property
    def keep_hidden(self):
        return self.phi is not None

    def __len__(self):
        return self.size

    def __getitem__(self, i):
        phi = None if self.phi is None else Shift(int(self.phi[i]), self.n)
        eps = None if self.eps is None else self.eps[i]
        return Observation(self.Y[i], phi, eps, self.sigma)

    def subset(self, stop, start=0):
        """Observations ``start:stop`` as a new dataset sharing the arrays."""
        sl = slice(start, stop)
        return Dataset(self.template, self.sigma, self.Y[sl], self.seed,
                       None if self.phi is None else self.phi[sl],
                       None if self.eps is None else self.eps[sl],
                       self.template_spec)


def _blocks(seed, count):
    nblocks = -(-count // BLOCK_SIZE)
    children = np.random.SeedSequence(seed).spawn(nblocks)
    for b, child in enumerate(children):
        lo = b * BLOCK_SIZE
        yield lo, min(lo + BLOCK_SIZE, count), np.random.default_rng(child)


def sample_noise(n, count, seed):
    """``count`` standardised noise vectors in R^n (rows), ``E||eps||^2 = 1``."""
    eps = np.empty((count, n))
    for lo, hi, rng in _blocks(seed, count):
        eps[lo:hi] = rng.standard_normal((hi - lo, n)) / np.sqrt(n)
    return eps


def sample_dataset(t0, sigma, size, seed, keep_hidden=True, template_spec=None):
    """Draw ``size`` i.i.d. observations ``phi . t0 + sigma * eps``.

    Parameters
    ----------
    t0 : array_like, shape (N,)
        Template.
    sigma : float
        Noise level, ``>= 0``.
    size : int
        Number of observations ``I >= 1``.
    seed : int
        Seed of the block substreams; equal arguments give bitwise-equal data.
    keep_hidden : bool
        Keep the drawn shifts and noises for oracle baselines.

    Returns
    -------
    Dataset
    """
    t0 = as_signal(t0)
    if sigma < 0:
        raise ValueError("sigma must be nonnegative, got %r" % sigma)
    if size < 1:
        raise ValueError("sample size must be at least 1")
    n = t0.size
    phi = np.empty(size, dtype=np.int64)
    eps = np.empty((size, n))
    for lo, hi, rng in _blocks(seed, size):
        phi[lo:hi] = rng.integers(0, n, hi - lo)
        eps[lo:hi] = rng.standard_normal((hi - lo, n)) / np.sqrt(n)
    Y = apply_batch(phi, np.broadcast_to(t0, (size, n))) + sigma * eps
    if not keep_hidden:
        phi = eps = None
    return Dataset(t0, float(sigma), Y, seed, phi, eps, template_spec)


def reconstruct(ds, i):
    """Recompute observation ``i`` from its hidden fields."""
    if ds.eps is None:
        raise ValueError("dataset does not retain hidden noise")
    return apply(Shift(int(ds.phi[i]), ds.n), ds.template) + ds.sigma * ds.eps[i]


def empirical_moments(ds):
    """Sanity diagnostics of a dataset.

    Returns a dict with the mean squared observation norm and its standard
    error; when the hidden fields are kept, also the mean squared noise norm
    and the histogram of shifts.
    """
    if ds.size == 0:
        raise ValueError("empty dataset")
    sq = np.sum(ds.Y ** 2, axis=1)
    out = {
        "mean_sq_norm_y": float(sq.mean()),
        "se_sq_norm_y": float(sq.std(ddof=1) / np.sqrt(ds.size)) if ds.size > 1 else 0.0,
    }
    if ds.eps is not None:
        out["mean_sq_norm_eps"] = float(np.sum(ds.eps ** 2, axis=1).mean())
    if ds.phi is not None:
        out["phi_counts"] = np.bincount(ds.phi, minlength=ds.n)
    return out


def _fmt(v):
    return "%.17g" % v


def save_dataset(ds, csv_path, header_path):
    """Write the observations as CSV and the metadata as a JSON header.

    CSV columns: ``index``, ``phi`` (only when hidden shifts are kept) and
    ``y0 ... y{N-1}``, all floats with 17 significant digits.
    """
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        cols = ["index"] + (["phi"] if ds.phi is not None else [])
        w.writerow(cols + ["y%d" % j for j in range(ds.n)])
        for i in range(ds.size):
            row = [str(i)] + ([str(int(ds.phi[i]))] if ds.phi is not None else [])
            w.writerow(row + [_fmt(v) for v in ds.Y[i]])
    header = {
        "schema_version": 1,
        "N": ds.n,
        "I": ds.size,
        "sigma": ds.sigma,
        "seed": ds.seed,
        "template": [float(v) for v in ds.template],
        "template_spec": None if ds.template_spec is None else ds.template_spec.to_dict(),
    }
    with open(header_path, "w") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(csv_path, header_path):
    """Inverse of :func:`save_dataset`; noises are not restored."""
    with open(header_path) as fh:
        header = json.load(fh)
    with open(csv_path, newline="") as fh:
        rows = list(csv.reader(fh))
    cols = rows[0]
    has_phi = len(cols) > 1 and cols[1] == "phi"
    body = rows[1:]
    off = 2 if has_phi else 1
    Y = np.array([[float(v) for v in r[off:]] for r in body]).reshape(len(body), -1)
    if Y.shape != (header["I"], header["N"]):
        raise ValueError("CSV shape %s disagrees with header (I=%d, N=%d)"
                         % (Y.shape, header["I"], header["N"]))
    phi = np.array([int(r[1]) for r in body], dtype=np.int64) if has_phi else None
    spec = header.get("template_spec")
    return Dataset(np.array(header["template"], dtype=float), float(header["sigma"]),
                   Y, header.get("seed"), phi, None,
                   None if spec is None else TemplateSpec.from_dict(spec))
