"""
Command-line experiment harness.

    orbitmean experiment --config run.cfg --out results/
    orbitmean variance-curve --sigma 10 --samples 100000
    orbitmean k-sweep --sigmas 5,10,20,40
    orbitmean multistart --samples 2000 --starts 20
    orbitmean dataset generate --out data/   |  orbitmean dataset inspect data/
    orbitmean register a.csv b.csv

Config files are flat ``key = value`` lines (``#`` comments, optional
``[experiment]`` header).  Command-line flags override the file.  Every
number plotted in an SVG is also written to a CSV next to it.

Exit codes: 0 success, 2 configuration error, 3 max-max did not converge.
"""
import argparse
import configparser
import csv
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import svg
from .bias import bias_report, estimate_K, oracle_mean_known_transforms
from .group import apply, as_signal, register_fft
from .maxmax import certificate_json, multi_start, run_maxmax, verify_karcher, write_trace_csv
from .model import (TemplateSpec, empirical_moments, load_dataset, make_template,
                    sample_dataset, save_dataset)
from .quotient import (empirical_variance, log_checkpoints, prepare, quotient_distance,
                       variance_curve, write_curve_csv)

log = logging.getLogger("orbitmean")

EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3


class ConfigError(Exception):
    pass


@dataclass
class ExperimentConfig:
    template: str = "step"
    n: int = 64
    start: int = 16
    length: int = 16
    height: float = 1.0
    frequencies: list = field(default_factory=lambda: [1])
    amplitudes: list = field(default_factory=lambda: [1.0])
    template_file: str = ""
    sigma: float = 10.0
    samples: int = 100_000
    seed: int = 1
    keep_hidden: bool = True
    max_steps: int = 10_000
    n_starts: int = 20
    k_n_mc: int = 100_000
    k_n_starts: int = 20
    k_seed: int = 0
    n_perturb: int = 100
    sigmas: list = field(default_factory=lambda: [5.0, 10.0, 20.0, 40.0])
    out: str = "out"
    emit_plots: bool = True

    def validate(self):
        if self.template not in ("step", "smooth", "file"):
            raise ConfigError("template must be step, smooth or file")
        if self.sigma < 0:
            raise ConfigError("sigma must be nonnegative")
        if self.samples < 1:
            raise ConfigError("samples must be at least 1")
        if self.max_steps < 1 or self.n_starts < 1 or self.k_n_starts < 0:
            raise ConfigError("max_steps and n_starts must be positive")
        if self.k_n_mc < 1000:
            raise ConfigError("k_n_mc must be at least 1000")
        if any(s < 0 for s in self.sigmas):
            raise ConfigError("sigmas must be nonnegative")
        if self.template == "file" and not self.template_file:
            raise ConfigError("template=file needs template_file")

    def template_spec(self):
        if self.template == "file":
            values = _read_signal(self.template_file)
            return TemplateSpec(kind="custom", n=len(values), values=list(values))
        return TemplateSpec(kind=self.template, n=self.n, start=self.start,
                            length=self.length, height=self.height,
                            frequencies=list(self.frequencies),
                            amplitudes=list(self.amplitudes))

    def to_dict(self):
        """Serializable settings; the output location is left out so that
        reruns into different directories produce identical reports."""
        d = asdict(self)
        del d["out"]
        return d


def _parse_value(kind, raw):
    raw = raw.strip()
    if kind is bool:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError("not a boolean: %r" % raw)
    if kind is list:
        return [float(x) for x in raw.replace(",", " ").split()]
    return kind(raw)


_TYPES = {"template": str, "n": int, "start": int, "length": int, "height": float,
          "frequencies": list, "amplitudes": list, "template_file": str,
          "sigma": float, "samples": int, "seed": int, "keep_hidden": bool,
          "max_steps": int, "n_starts": int, "k_n_mc": int, "k_n_starts": int,
          "k_seed": int, "n_perturb": int, "sigmas": list, "out": str,
          "emit_plots": bool}


def load_config(path=None, overrides=None):
    """Defaults, then the key-value file at ``path``, then ``overrides``."""
    cfg = ExperimentConfig()
    items = {}
    if path:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError("cannot read config: %s" % exc)
        if not text.lstrip().startswith("["):
            text = "[experiment]\n" + text
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(str(exc))
        for section in parser.sections():
            items.update(parser[section])
    items.update({k: v for k, v in (overrides or {}).items() if v is not None})
    for key, raw in items.items():
        key = key.replace("-", "_")
        if key not in _TYPES:
            raise ConfigError("unknown config key %r" % key)
        try:
            value = raw if not isinstance(raw, str) else _parse_value(_TYPES[key], raw)
        except ValueError as exc:
            raise ConfigError("bad value for %s: %s" % (key, exc))
        if _TYPES[key] is int:
            value = int(value)
        elif _TYPES[key] is float:
            value = float(value)
        setattr(cfg, key, value)
    cfg.validate()
    return cfg


def _read_signal(path):
    """One signal from a CSV/text file: numbers in one row or one column."""
    vals = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            for cell in row:
                cell = cell.strip()
                if not cell:
                    continue
                try:
                    vals.append(float(cell))
                except ValueError:
                    continue
    return as_signal(vals)


def _f17(v):
    return "%.17g" % v


def _outdir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise ConfigError("cannot create output directory %s: %s" % (path, exc))
    if not os.access(path, os.W_OK):
        raise ConfigError("output directory %s is not writable" % path)
    return path


def _write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_signals_csv(path, columns):
    names = list(columns)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["j"] + names)
        for j in range(len(columns[names[0]])):
            w.writerow([j] + [_f17(columns[c][j]) for c in names])


def _align(ref, x):
    """``x`` moved onto its registration with respect to ``ref``."""
    return apply(register_fft(ref, x).element, x)


def _sample(cfg):
    spec = cfg.template_spec()
    t0 = make_template(spec)
    ds = sample_dataset(t0, cfg.sigma, cfg.samples, cfg.seed, cfg.keep_hidden, spec)
    return t0, ds


def cmd_experiment(cfg):
    """Sample, run max-max, certify, estimate K and write the bias report."""
    out = _outdir(cfg.out)
    t0, ds = _sample(cfg)
    p = prepare(ds)
    log.info("running max-max on I=%d, N=%d, sigma=%g", ds.size, ds.n, ds.sigma)
    res = run_maxmax(p, max_steps=cfg.max_steps)
    cert = verify_karcher(res.estimate, p, cfg.n_perturb, cfg.seed)
    res.certificate = cert
    K = estimate_K(ds.n, n_mc=cfg.k_n_mc, n_starts=cfg.k_n_starts, seed=cfg.k_seed)
    report = bias_report(t0, cfg.sigma, res.estimate, K)

    columns = {"template": t0, "estimate": _align(t0, res.estimate)}
    if ds.phi is not None:
        columns["oracle_mean"] = oracle_mean_known_transforms(ds)
    summary = report.to_dict()
    f_est = empirical_variance(res.estimate, p)
    f_tpl = empirical_variance(t0, p)
    summary.update({
        "config": cfg.to_dict(),
        "converged": res.converged,
        "steps": res.steps,
        "F_I_estimate": f_est.value,
        "F_I_estimate_se": f_est.std_error,
        "F_I_template": f_tpl.value,
        "F_I_template_se": f_tpl.std_error,
        "certificate": cert.to_dict(),
    })
    if "oracle_mean" in columns:
        eb_oracle = quotient_distance(t0, columns["oracle_mean"])
        summary["EB_oracle"] = eb_oracle
        summary["EB_oracle_over_sigma"] = eb_oracle / cfg.sigma if cfg.sigma > 0 else None
    _write_json(summary, os.path.join(out, "report.json"))
    write_trace_csv(res, os.path.join(out, "trace.csv"))
    certificate_json(cert, os.path.join(out, "certificate.json"))
    _write_signals_csv(os.path.join(out, "signals.csv"), columns)
    if cfg.emit_plots:
        j = list(range(ds.n))
        svg.line_plot(os.path.join(out, "overlay.svg"),
                      [(name, j, list(v)) for name, v in columns.items()],
                      title="template and estimates", xlabel="coordinate", ylabel="value")
    print("EB/sigma = %.4f  steps = %d  converged = %s  K = %.4f"
          % (summary["EB_over_sigma"] if cfg.sigma > 0 else 0.0, res.steps, res.converged, K.value))
    return 0 if res.converged else EXIT_NOT_CONVERGED


def cmd_variance_curve(cfg, estimate_path=None):
    """``F_I(t0)`` and ``F_I(m_hat)`` against ``I`` at log-spaced checkpoints."""
    out = _outdir(cfg.out)
    t0, ds = _sample(cfg)
    p = prepare(ds)
    converged = True
    if estimate_path:
        m_hat = _read_signal(estimate_path)
    else:
        res = run_maxmax(p, max_steps=cfg.max_steps)
        m_hat, converged = res.estimate, res.converged
    checkpoints = log_checkpoints(ds.size)
    rows = variance_curve([t0, m_hat], p, checkpoints, labels=["template", "estimate"])
    write_curve_csv(rows, os.path.join(out, "variance_curve.csv"))
    if cfg.emit_plots:
        series = []
        for label in ("template", "estimate"):
            sel = [r for r in rows if r["label"] == label]
            series.append((label, [r["I"] for r in sel], [r["F_I"] for r in sel]))
        svg.line_plot(os.path.join(out, "variance_curve.svg"), series,
                      title="empirical variance vs sample size", xlabel="I",
                      ylabel="F_I", logx=True)
    final = [r for r in rows if r["I"] == ds.size]
    for r in final:
        print("%-9s F_I = %.6f +- %.6f" % (r["label"], r["F_I"], r["std_error"]))
    return 0 if converged else EXIT_NOT_CONVERGED


def cmd_k_sweep(cfg):
    """EB, EB/sigma and the bounds band for each noise level in ``cfg.sigmas``."""
    if len(cfg.sigmas) < 2:
        raise ConfigError("k-sweep needs at least two sigma values")
    out = _outdir(cfg.out)
    spec = cfg.template_spec()
    t0 = make_template(spec)
    tn = float(np.linalg.norm(t0))
    K = estimate_K(t0.size, n_mc=cfg.k_n_mc, n_starts=cfg.k_n_starts, seed=cfg.k_seed)
    rows = []
    converged = True
    for sigma in cfg.sigmas:
        ds = sample_dataset(t0, sigma, cfg.samples, cfg.seed, False, spec)
        res = run_maxmax(ds, max_steps=cfg.max_steps)
        converged &= res.converged
        rep = bias_report(t0, sigma, res.estimate, K)
        rows.append({
            "sigma": sigma, "EB": rep.EB,
            "EB_over_sigma": rep.EB_over_sigma if sigma > 0 else 0.0,
            "K": K.value, "K_std_error": K.std_error,
            "lower": rep.lower_bound, "upper": rep.upper_bound,
            "inside": rep.bounds_satisfied, "steps": res.steps,
            "converged": res.converged,
        })
        log.info("sigma=%g EB=%.4f", sigma, rep.EB)
    with open(os.path.join(out, "k_sweep.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        keys = list(rows[0])
        w.writerow(keys)
        for r in rows:
            w.writerow([_f17(r[k]) if isinstance(r[k], float) else r[k] for k in keys])
    _write_json({"schema_version": 1, "template_norm": tn, "K": K.to_dict(),
                 "config": cfg.to_dict()}, os.path.join(out, "k_sweep.json"))
    if cfg.emit_plots:
        s = [r["sigma"] for r in rows]
        svg.line_plot(os.path.join(out, "k_sweep.svg"),
                      [("EB", s, [r["EB"] for r in rows]),
                       ("sigma K", s, [x * K.value for x in s])],
                      title="empirical bias vs noise level", xlabel="sigma", ylabel="EB",
                      band=(s, [r["lower"] for r in rows], [r["upper"] for r in rows]))
    for r in rows:
        print("sigma=%-6g EB/sigma=%.4f  K=%.4f  inside=%s"
              % (r["sigma"], r["EB_over_sigma"], r["K"], r["inside"]))
    return 0 if converged else EXIT_NOT_CONVERGED


def cmd_multistart(cfg):
    """Final variances of max-max from many starting points."""
    out = _outdir(cfg.out)
    t0, ds = _sample(cfg)
    results = multi_start(ds, cfg.n_starts, cfg.seed, cfg.max_steps)
    with open(os.path.join(out, "multistart.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["start_id", "F_I", "steps", "norm", "converged", "EB"])
        for r in results:
            w.writerow([r.start_id, _f17(r.variance), r.steps,
                        _f17(np.linalg.norm(r.estimate)), r.converged,
                        _f17(quotient_distance(t0, r.estimate))])
    with open(os.path.join(out, "multistart_dq.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["start_id"] + [str(r.start_id) for r in results])
        for a in results:
            w.writerow([a.start_id] + [_f17(quotient_distance(a.estimate, b.estimate))
                                       for b in results])
    if cfg.emit_plots:
        svg.histogram(os.path.join(out, "multistart.svg"), [r.variance for r in results],
                      title="final empirical variance over starts", xlabel="F_I")
    default = next(r for r in results if r.start_id == 0)
    print("best F_I = %.6f (start %d), default start F_I = %.6f, distinct values = %d"
          % (results[0].variance, results[0].start_id, default.variance,
             len({round(r.variance, 9) for r in results})))
    return 0 if all(r.converged for r in results) else EXIT_NOT_CONVERGED


def cmd_dataset(cfg, action, path):
    if action == "generate":
        out = _outdir(cfg.out)
        _, ds = _sample(cfg)
        save_dataset(ds, os.path.join(out, "dataset.csv"), os.path.join(out, "dataset.json"))
        print("wrote %d observations to %s" % (ds.size, out))
        return 0
    base = path or cfg.out
    try:
        ds = load_dataset(os.path.join(base, "dataset.csv"), os.path.join(base, "dataset.json"))
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError("cannot load dataset from %s: %s" % (base, exc))
    mom = empirical_moments(ds)
    info = {"I": ds.size, "N": ds.n, "sigma": ds.sigma, "seed": ds.seed,
            "template_norm": float(np.linalg.norm(ds.template)),
            "mean_sq_norm_y": mom["mean_sq_norm_y"], "se_sq_norm_y": mom["se_sq_norm_y"]}
    if "phi_counts" in mom:
        info["phi_counts"] = [int(c) for c in mom["phi_counts"]]
    print(json.dumps(info, indent=2, sort_keys=True))
    return 0


def cmd_register(x_path, y_path):
    try:
        x = _read_signal(x_path)
        y = _read_signal(y_path)
        reg = register_fft(x, y)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc))
    print(json.dumps({"schema_version": 1, "shift": reg.element.k, "N": reg.element.n,
                      "distance": reg.distance, "margin": reg.margin,
                      "unique": reg.unique}, indent=2, sort_keys=True))
    return 0


def _common(p):
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--sigma", type=float)
    p.add_argument("--samples", type=int, help="sample size I")
    p.add_argument("--template", choices=["step", "smooth", "file"])
    p.add_argument("--template-file", dest="template_file")
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--k-n-mc", dest="k_n_mc", type=int)
    p.add_argument("--k-starts", dest="k_n_starts", type=int)
    p.add_argument("--no-plots", dest="emit_plots", action="store_false", default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="orbitmean", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("experiment", help="max-max run with bias report"))
    p = sub.add_parser("variance-curve", help="F_I(t0) and F_I(m_hat) versus I")
    _common(p)
    p.add_argument("--estimate", help="CSV with a precomputed estimate")
    p = sub.add_parser("k-sweep", help="EB against sigma K")
    _common(p)
    p.add_argument("--sigmas", help="comma separated noise levels")
    p = sub.add_parser("multistart", help="max-max from many starts")
    _common(p)
    p.add_argument("--starts", dest="n_starts", type=int)
    p = sub.add_parser("dataset", help="generate or inspect a dataset")
    _common(p)
    p.add_argument("action", choices=["generate", "inspect"])
    p.add_argument("path", nargs="?", help="dataset directory for inspect")
    p = sub.add_parser("register", help="align two signals from CSV files")
    p.add_argument("x")
    p.add_argument("y")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "register":
            return cmd_register(args.x, args.y)
        keys = {f.name for f in fields(ExperimentConfig)}
        overrides = {k: v for k, v in vars(args).items() if k in keys and v is not None}
        cfg = load_config(args.config, overrides)
        if args.command == "experiment":
            return cmd_experiment(cfg)
        if args.command == "variance-curve":
            return cmd_variance_curve(cfg, args.estimate)
        if args.command == "k-sweep":
            return cmd_k_sweep(cfg)
        if args.command == "multistart":
            return cmd_multistart(cfg)
        if args.command == "dataset":
            return cmd_dataset(cfg, args.action, args.path)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
