"""Static SVG line charts of relative efficiency against p."""
from __future__ import annotations

import math
from collections import OrderedDict
from xml.sax.saxutils import escape

from .estimators import ESTIMATOR_IDS

PANEL_W, PANEL_H = 420, 300
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 56, 16, 34, 44
LEGEND_H = 28

COLORS = {
    "srs_emp": "#7f7f7f", "srs_lf": "#1f77b4", "srs_hd": "#aec7e8", "rss_emp": "#2ca02c",
    "rss_lf": "#d62728", "rss_hd": "#ff7f0e", "orss_lf": "#9467bd", "orss_hd": "#8c564b",
}


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    span = hi - lo
    raw = span / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw), default=raw)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = first
    while t <= hi + 1e-9:
        ticks.append(round(t, 10))
        t += step
    return ticks


def facets(rows) -> "OrderedDict[tuple, list]":
    groups: OrderedDict[tuple, list] = OrderedDict()
    for row in rows:
        groups.setdefault((row.distribution, row.rho, row.m, row.k), []).append(row)
    return groups


def _panel(rows, key, x0: float, y0: float) -> list[str]:
    dist, rho, m, k = key
    ps = sorted({r.p for r in rows})
    finite = [r.re for r in rows if math.isfinite(r.re)]
    y_hi = max(finite + [1.0]) * 1.1
    x_lo, x_hi = (ps[0] - 0.05, ps[-1] + 0.05) if len(ps) > 1 else (ps[0] - 0.1, ps[0] + 0.1)
    iw = PANEL_W - MARGIN_L - MARGIN_R
    ih = PANEL_H - MARGIN_T - MARGIN_B

    def sx(p):
        return x0 + MARGIN_L + (p - x_lo) / (x_hi - x_lo) * iw

    def sy(v):
        return y0 + MARGIN_T + ih - v / y_hi * ih

    out = [f'<g class="panel">',
           f'<text x="{_fmt(x0 + PANEL_W / 2)}" y="{_fmt(y0 + 20)}" text-anchor="middle" font-size="13">'
           f'{escape(dist)}, rho={escape(rho)}, (m,k)=({m},{k})</text>',
           f'<rect x="{_fmt(x0 + MARGIN_L)}" y="{_fmt(y0 + MARGIN_T)}" width="{_fmt(iw)}" height="{_fmt(ih)}" '
           f'fill="none" stroke="#333"/>']
    for t in _nice_ticks(0.0, y_hi):
        out.append(f'<text x="{_fmt(x0 + MARGIN_L - 6)}" y="{_fmt(sy(t) + 4)}" text-anchor="end" '
                   f'font-size="10">{t:g}</text>')
    for p in ps:
        out.append(f'<text x="{_fmt(sx(p))}" y="{_fmt(y0 + MARGIN_T + ih + 14)}" text-anchor="middle" '
                   f'font-size="10">{p:g}</text>')
    out.append(f'<text x="{_fmt(x0 + MARGIN_L + iw / 2)}" y="{_fmt(y0 + PANEL_H - 8)}" text-anchor="middle" '
               f'font-size="11">p</text>')
    out.append(f'<line class="reference" x1="{_fmt(x0 + MARGIN_L)}" y1="{_fmt(sy(1.0))}" '
               f'x2="{_fmt(x0 + MARGIN_L + iw)}" y2="{_fmt(sy(1.0))}" stroke="#999" stroke-dasharray="5,4"/>')
    names = [e for e in ESTIMATOR_IDS if any(r.estimator == e for r in rows)]
    names += sorted({r.estimator for r in rows} - set(names))
    for name in names:
        pts = sorted((r.p, r.re) for r in rows if r.estimator == name and math.isfinite(r.re))
        if not pts:
            continue
        coords = " ".join(f"{_fmt(sx(p))},{_fmt(sy(v))}" for p, v in pts)
        color = COLORS.get(name, "#000")
        out.append(f'<polyline data-estimator="{escape(name)}" fill="none" stroke="{color}" '
                   f'stroke-width="1.6" points="{coords}"/>')
    out.append("</g>")
    return out


def render_svg(rows) -> str:
    """SVG text with one panel per (distribution, rho, m, k) group."""
    groups = facets(rows)
    if not groups:
        raise ValueError("no result rows to plot")
    width = PANEL_W * len(groups)
    height = PANEL_H + LEGEND_H
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             '<rect width="100%" height="100%" fill="white"/>']
    for idx, (key, grp) in enumerate(groups.items()):
        parts.extend(_panel(grp, key, idx * PANEL_W, 0))
    present = [e for e in ESTIMATOR_IDS if any(r.estimator == e for r in rows)]
    present += sorted({r.estimator for r in rows} - set(present))
    x = 10.0
    parts.append('<g class="legend">')
    for name in present:
        parts.append(f'<rect x="{_fmt(x)}" y="{_fmt(PANEL_H + 8)}" width="14" height="4" '
                     f'fill="{COLORS.get(name, "#000")}"/>')
        parts.append(f'<text x="{_fmt(x + 18)}" y="{_fmt(PANEL_H + 14)}" font-size="11">{escape(name)}</text>')
        x += 26 + 7 * len(name)
    parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
