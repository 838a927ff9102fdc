"""Minimal self-contained SVG plots of harness tables.

Only the standard library is used, so plotting cannot perturb numerical
results.  Output is a deterministic function of the table contents.
"""

import math
import os
from xml.sax.saxutils import escape

from ..exceptions import DomainError
from .artifacts import read_table

KINDS = ("line", "band", "scatter")
WIDTH, HEIGHT, MARGIN = 640, 420, 56
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")

# columns used when the caller does not name them, per table
DEFAULT_COLUMNS = {
    "fig1_posterior_means": {"x": "x", "y": "posterior_mean", "group": "sigma"},
    "inverse_regression": {"x": "t", "y": "mean", "group": "n"},
    "dj94_curves": {"x": "t", "y": "mean", "group": "signal"},
    "density_estimation": {"x": "x", "y": "mean", "group": "n"},
    "classification": {"x": "x", "y": "mean", "group": "n"},
    "rate_sweep": {"x": "n", "y": "l2_error", "group": "model"},
    "prior_mass": {"x": "n", "y": "ratio"},
}


class PlotError(DomainError):
    """The table cannot be plotted as requested."""


def _num(v, col):
    try:
        return float(v)
    except ValueError:
        raise PlotError(f"column {col!r} holds non-numeric value {v!r}") from None


def _ticks(lo, hi, count=5):
    if hi == lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / count))
    for m in (1, 2, 5, 10):
        if (hi - lo) / (step * m) <= count:
            step *= m
            break
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-12 * abs(step):
        out.append(round(v, 12))
        v += step
    return out


def _fmt(v):
    return format(v, ".4g")


def render_svg(columns, rows, kind, x=None, y=None, lower="lower", upper="upper", group=None, title=""):
    """Return SVG text for ``rows`` (lists of strings with header ``columns``)."""
    if kind not in KINDS:
        raise PlotError(f"unknown plot kind {kind!r}; expected one of {', '.join(KINDS)}")
    if not rows:
        raise PlotError("table has no rows")
    need = [x, y] + ([lower, upper] if kind == "band" else []) + ([group] if group else [])
    for col in need:
        if col not in columns:
            raise PlotError(f"table has no column {col!r}")
    ix, iy = columns.index(x), columns.index(y)
    il = columns.index(lower) if kind == "band" else None
    iu = columns.index(upper) if kind == "band" else None
    ig = columns.index(group) if group else None
    series = {}
    for r in rows:
        key = r[ig] if ig is not None else ""
        pt = (_num(r[ix], x), _num(r[iy], y),
              _num(r[il], lower) if il is not None else None, _num(r[iu], upper) if iu is not None else None)
        series.setdefault(key, []).append(pt)
    xs = [p[0] for s in series.values() for p in s]
    ys = [v for s in series.values() for p in s for v in p[1:] if v is not None and math.isfinite(v)]
    if not ys:
        raise PlotError(f"column {y!r} has no finite values")
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1

    def px(v):
        return MARGIN + (v - x0) / (x1 - x0) * (WIDTH - 2 * MARGIN)

    def py(v):
        return HEIGHT - MARGIN - (v - y0) / (y1 - y0) * (HEIGHT - 2 * MARGIN)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>']
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>')
    # axes and ticks
    out.append(f'<path d="M{MARGIN},{HEIGHT - MARGIN}H{WIDTH - MARGIN}M{MARGIN},{HEIGHT - MARGIN}V{MARGIN}" '
               'stroke="black" fill="none"/>')
    for t in _ticks(x0, x1):
        out.append(f'<text x="{px(t):.1f}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle" '
                   f'font-size="10">{_fmt(t)}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<text x="{MARGIN - 6}" y="{py(t) + 3:.1f}" text-anchor="end" font-size="10">{_fmt(t)}</text>')
    out.append(f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle" font-size="12">{escape(x)}</text>')
    out.append(f'<text x="14" y="{HEIGHT / 2:.1f}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 14 {HEIGHT / 2:.1f})">{escape(y)}</text>')
    for i, (key, pts) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = sorted(pts, key=lambda p: p[0]) if kind != "scatter" else pts
        if kind == "band":
            up = " ".join(f"{px(p[0]):.2f},{py(p[3]):.2f}" for p in pts)
            down = " ".join(f"{px(p[0]):.2f},{py(p[2]):.2f}" for p in reversed(pts))
            out.append(f'<path d="M{up} L{down} Z" fill="{color}" fill-opacity="0.2" stroke="none"/>')
            for j in (2, 3):
                d = " ".join(f"{px(p[0]):.2f},{py(p[j]):.2f}" for p in pts)
                out.append(f'<path d="M{d}" stroke="{color}" stroke-opacity="0.5" fill="none"/>')
        if kind == "scatter":
            for p in pts:
                out.append(f'<circle cx="{px(p[0]):.2f}" cy="{py(p[1]):.2f}" r="2.5" fill="{color}"/>')
        else:
            d = " ".join(f"{px(p[0]):.2f},{py(p[1]):.2f}" for p in pts)
            out.append(f'<path d="M{d}" stroke="{color}" stroke-width="1.5" fill="none"/>')
        if key:
            ly = MARGIN + 14 * i
            out.append(f'<text x="{WIDTH - MARGIN + 4}" y="{ly}" font-size="10" fill="{color}">'
                       f'{escape(group)}={escape(key)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(table_path, kind, out_path=None, x=None, y=None, lower="lower", upper="upper", group=None):
    """Render ``table_path`` to SVG; returns the written path.

    Nothing is written when the table is empty or lacks a column.
    """
    if not os.path.exists(table_path):
        raise PlotError(f"table not found: {table_path}")
    columns, rows = read_table(table_path)
    name = os.path.splitext(os.path.basename(table_path))[0]
    defaults = DEFAULT_COLUMNS.get(name, {})
    x = x or defaults.get("x") or (columns[0] if columns else None)
    y = y or defaults.get("y") or (columns[1] if len(columns) > 1 else None)
    if group is None:
        group = defaults.get("group")
    svg = render_svg(columns, rows, kind, x, y, lower, upper, group, title=name)
    out_path = out_path or os.path.splitext(table_path)[0] + f"_{kind}.svg"
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(svg)
    return out_path
