"""Minimal standalone SVG line charts for trajectory series."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=150, top=40, bottom=50)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f")


def _ticks(lo, hi, n=5):
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def render_plot(series: dict, path=None, logy: bool = False, title: str = "", xlabel: str = "step", ylabel: str = "") -> str:
    """Render named (xs, ys) series to SVG text, optionally writing it to ``path``.

    On a log axis non-positive values are dropped and reported in an XML
    comment; a series left with fewer than two points draws no line.
    """
    if not series:
        raise ValueError("need at least one series")
    cleaned, warnings = {}, []
    for name, (xs, ys) in series.items():
        if len(xs) != len(ys):
            raise ValueError(f"series {name!r}: x and y lengths differ")
        if len(xs) < 2:
            raise ValueError(f"series {name!r} needs at least two points")
        pts = [(float(x), float(y)) for x, y in zip(xs, ys) if math.isfinite(float(y))]
        if logy:
            kept = [(x, y) for x, y in pts if y > 0]
            if len(kept) < len(pts):
                warnings.append(f"dropped {len(pts) - len(kept)} non-positive point(s) from series {name} on log axis")
            pts = [(x, math.log10(y)) for x, y in kept]
        cleaned[name] = pts

    all_pts = [p for pts in cleaned.values() for p in pts]
    if not all_pts:
        raise ValueError("no plottable points")
    x_lo, x_hi = min(p[0] for p in all_pts), max(p[0] for p in all_pts)
    y_lo, y_hi = min(p[1] for p in all_pts), max(p[1] for p in all_pts)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5

    left, top = MARGIN["left"], MARGIN["top"]
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(x):
        return left + (x - x_lo) / (x_hi - x_lo) * pw

    def sy(y):
        return top + ph - (y - y_lo) / (y_hi - y_lo) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
    ]
    for w in warnings:
        out.append(f"<!-- warning: {escape(w).replace('--', '- -')} -->")
    out.append(f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>')
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{escape(title)}</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')

    for x in _ticks(x_lo, x_hi):
        out.append(f'<text x="{sx(x):.2f}" y="{top + ph + 16}" text-anchor="middle" font-family="sans-serif" font-size="10">{x:g}</text>')
    for y in _ticks(y_lo, y_hi):
        label = f"1e{y:.2g}" if logy else f"{y:.3g}"
        out.append(f'<text x="{left - 6}" y="{sy(y) + 3:.2f}" text-anchor="end" font-family="sans-serif" font-size="10">{escape(label)}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle" font-family="sans-serif" font-size="12">{escape(xlabel)}</text>')
    ylab = f"{ylabel} (log10)" if logy and ylabel else ylabel
    out.append(
        f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(ylab)}</text>'
    )

    for idx, (name, pts) in enumerate(cleaned.items()):
        color = COLORS[idx % len(COLORS)]
        if len(pts) >= 2:
            coords = " ".join(f"{sx(x):.3f},{sy(y):.3f}" for x, y in pts)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        ly = top + 14 + 18 * idx
        lx = left + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly + 4}" font-family="sans-serif" font-size="11">{escape(str(name))}</text>')
    out.append("</svg>")
    svg = "\n".join(out) + "\n"

    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(svg)
    return svg
