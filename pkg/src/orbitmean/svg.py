"""Minimal deterministic SVG line plots and histograms (no plotting backend)."""
import math

from . import __version__

W, H = 640, 400
ML, MR, MT, MB = 70, 20, 40, 50
COLORS = ["#1f4eb4", "#c8281e", "#2a9d3c", "#7a3fb0", "#d98a00", "#333333"]


def _fmt(v):
    return "%.2f" % v


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    out = []
    t = start
    while t <= hi + 1e-12 * abs(hi):
        out.append(t)
        t += step
    return out


class _Frame:
    def __init__(self, xlo, xhi, ylo, yhi, logx=False):
        if logx:
            xlo, xhi = math.log10(xlo), math.log10(xhi)
        if xhi == xlo:
            xlo, xhi = xlo - 1, xhi + 1
        if yhi == ylo:
            ylo, yhi = ylo - 1, yhi + 1
        pad = 0.05 * (yhi - ylo)
        self.xlo, self.xhi, self.ylo, self.yhi = xlo, xhi, ylo - pad, yhi + pad
        self.logx = logx

    def x(self, v):
        if self.logx:
            v = math.log10(v)
        return ML + (v - self.xlo) / (self.xhi - self.xlo) * (W - ML - MR)

    def y(self, v):
        return H - MB - (v - self.ylo) / (self.yhi - self.ylo) * (H - MT - MB)


def _header(title):
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        "<!-- orbitmean %s -->" % __version__,
        '<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
        'font-family="sans-serif" font-size="12">' % (W, H),
        '<rect width="100%" height="100%" fill="white"/>',
        '<text x="%d" y="22" text-anchor="middle" font-size="14">%s</text>'
        % (W // 2, _escape(title)),
    ]


def _escape(s):
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _axes(fr, xlabel, ylabel):
    out = []
    x0, x1 = ML, W - MR
    y0, y1 = H - MB, MT
    out.append('<path d="M%d %d H%d M%d %d V%d" stroke="black" fill="none"/>'
               % (x0, y0, x1, x0, y0, y1))
    if fr.logx:
        xt = [10 ** e for e in range(math.ceil(fr.xlo), math.floor(fr.xhi) + 1)]
    else:
        xt = _ticks(fr.xlo, fr.xhi)
    for t in xt:
        px = fr.x(t)
        out.append('<line x1="%s" y1="%d" x2="%s" y2="%d" stroke="black"/>'
                   % (_fmt(px), y0, _fmt(px), y0 + 5))
        out.append('<text x="%s" y="%d" text-anchor="middle">%s</text>'
                   % (_fmt(px), y0 + 18, "%g" % t))
    for t in _ticks(fr.ylo, fr.yhi):
        py = fr.y(t)
        out.append('<line x1="%d" y1="%s" x2="%d" y2="%s" stroke="black"/>'
                   % (x0 - 5, _fmt(py), x0, _fmt(py)))
        out.append('<text x="%d" y="%s" text-anchor="end">%s</text>'
                   % (x0 - 8, _fmt(py + 4), "%g" % round(t, 10)))
    out.append('<text x="%d" y="%d" text-anchor="middle">%s</text>'
               % ((x0 + x1) // 2, H - 10, _escape(xlabel)))
    out.append('<text x="16" y="%d" text-anchor="middle" transform="rotate(-90 16 %d)">%s</text>'
               % ((y0 + y1) // 2, (y0 + y1) // 2, _escape(ylabel)))
    return out


def line_plot(path, series, title="", xlabel="", ylabel="", logx=False, band=None):
    """Write polylines to ``path``.

    ``series`` is a list of ``(label, xs, ys)``; ``band`` an optional
    ``(xs, lower, upper)`` drawn as a shaded region behind the lines.
    """
    xs_all = [x for _, xs, _ in series for x in xs]
    ys_all = [y for _, _, ys in series for y in ys]
    if band is not None:
        xs_all += list(band[0])
        ys_all += list(band[1]) + list(band[2])
    fr = _Frame(min(xs_all), max(xs_all), min(ys_all), max(ys_all), logx)
    out = _header(title)
    if band is not None:
        bx, blo, bhi = band
        pts = [(fr.x(x), fr.y(y)) for x, y in zip(bx, bhi)]
        pts += [(fr.x(x), fr.y(y)) for x, y in reversed(list(zip(bx, blo)))]
        out.append('<polygon points="%s" fill="#999999" fill-opacity="0.25" stroke="none"/>'
                   % " ".join("%s,%s" % (_fmt(a), _fmt(b)) for a, b in pts))
    out += _axes(fr, xlabel, ylabel)
    for i, (label, xs, ys) in enumerate(series):
        c = COLORS[i % len(COLORS)]
        pts = " ".join("%s,%s" % (_fmt(fr.x(x)), _fmt(fr.y(y))) for x, y in zip(xs, ys))
        out.append('<polyline points="%s" fill="none" stroke="%s" stroke-width="1.5"/>'
                   % (pts, c))
        ly = MT + 14 + 16 * i
        out.append('<line x1="%d" y1="%d" x2="%d" y2="%d" stroke="%s" stroke-width="2"/>'
                   % (W - MR - 150, ly - 4, W - MR - 130, ly - 4, c))
        out.append('<text x="%d" y="%d">%s</text>' % (W - MR - 125, ly, _escape(label)))
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def histogram(path, values, bins=20, title="", xlabel="", ylabel="count"):
    lo, hi = min(values), max(values)
    if hi == lo:
        hi = lo + 1.0
    width = (hi - lo) / bins
    counts = [0] * bins
    for v in values:
        counts[min(int((v - lo) / width), bins - 1)] += 1
    fr = _Frame(lo, hi, 0, max(counts))
    fr.ylo = 0.0
    out = _header(title)
    out += _axes(fr, xlabel, ylabel)
    for b, c in enumerate(counts):
        x0, x1 = fr.x(lo + b * width), fr.x(lo + (b + 1) * width)
        out.append('<rect x="%s" y="%s" width="%s" height="%s" fill="%s"/>'
                   % (_fmt(x0), _fmt(fr.y(c)), _fmt(x1 - x0), _fmt(fr.y(0) - fr.y(c)),
                      COLORS[0]))
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
