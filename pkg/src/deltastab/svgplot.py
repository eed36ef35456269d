"""Minimal SVG line plots with a logarithmic y axis."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def log_line_plot(series, title: str = "", xlabel: str = "t", ylabel: str = "",
                  width: int = 640, height: int = 420, comment: str | None = None) -> str:
    """Render ``series`` -- a list of (label, xs, ys) -- as an SVG document.

    Nonpositive y values are skipped; every series keeps its own abscissae.
    """
    left, right, top, bottom = 70, 20, 35, 50
    pw, ph = width - left - right, height - top - bottom

    pts = [(lab, [(x, y) for x, y in zip(xs, ys) if y > 0 and math.isfinite(y)]) for lab, xs, ys in series]
    allx = [x for _, p in pts for x, _ in p]
    ally = [y for _, p in pts for _, y in p]
    if not allx:
        allx, ally = [0.0, 1.0], [1.0, 10.0]
    x0, x1 = min(allx), max(allx)
    if x1 == x0:
        x1 = x0 + 1.0
    d0 = math.floor(math.log10(min(ally)))
    d1 = math.ceil(math.log10(max(ally)))
    if d1 == d0:
        d1 = d0 + 1

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + (d1 - math.log10(y)) / (d1 - d0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">']
    if comment:
        out.append(f"<!-- {escape(comment).replace('--', '- -')} -->")
    out.append(f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')

    # decades on y; thin labels out when there are many
    step = max(1, math.ceil((d1 - d0) / 10))
    for d in range(d0, d1 + 1, step):
        y = sy(10.0 ** d)
        out.append(f'<line x1="{left}" y1="{_fmt(y)}" x2="{left + pw}" y2="{_fmt(y)}" stroke="#ddd"/>')
        out.append(f'<text x="{left - 6}" y="{_fmt(y + 4)}" font-size="11" text-anchor="end">1e{d}</text>')
    for k in range(6):
        xv = x0 + k * (x1 - x0) / 5
        x = sx(xv)
        out.append(f'<line x1="{_fmt(x)}" y1="{top + ph}" x2="{_fmt(x)}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(x)}" y="{top + ph + 18}" font-size="11" text-anchor="middle">{xv:.3g}</text>')

    for i, (lab, p) in enumerate(pts):
        if not p:
            continue
        color = COLORS[i % len(COLORS)]
        coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in p)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        ly = top + 14 + 16 * i
        out.append(f'<line x1="{left + pw - 150}" y1="{ly}" x2="{left + pw - 130}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw - 125}" y="{ly + 4}" font-size="11">{escape(lab)}</text>')

    if title:
        out.append(f'<text x="{width / 2}" y="20" font-size="14" text-anchor="middle">{escape(title)}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 10}" font-size="12" text-anchor="middle">'
               f'{escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="16" y="{top + ph / 2}" font-size="12" text-anchor="middle" '
                   f'transform="rotate(-90 16 {top + ph / 2})">{escape(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
