"""Minimal standalone SVG line plots."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=170, top=40, bottom=55)
COLORS = ("#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-9 * step:
        out.append(round(v, 12))
        v += step
    return out


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def render_svg_lineplot(
    series: Sequence[Sequence[tuple[float, float]]],
    labels: Sequence[str],
    path: str | Path | None = None,
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    reference_line: bool = False,
    dashed: Sequence[bool] | None = None,
) -> str:
    """Draw each series as a polyline with point markers.

    ``reference_line`` adds the diagonal ``y = x``.  Returns the SVG text and
    writes it to ``path`` when given.
    """
    series = [[(float(x), float(y)) for x, y in s] for s in series]
    if not series or any(len(s) == 0 for s in series):
        raise ValueError("render_svg_lineplot needs at least one nonempty series")
    if len(labels) != len(series):
        raise ValueError("one label per series is required")
    pts = [p for s in series for p in s if math.isfinite(p[1])]
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if reference_line:
        y0, y1 = min(y0, x0), max(y1, x1)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(x: float) -> float:
        return MARGIN["left"] + (x - x0) / (x1 - x0) * pw

    def sy(y: float) -> float:
        return MARGIN["top"] + (y1 - y) / (y1 - y0) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" '
        'font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    bx, by = MARGIN["left"], MARGIN["top"]
    out.append(
        f'<rect x="{bx}" y="{by}" width="{pw}" height="{ph}" fill="none" stroke="black"/>'
    )
    for t in _ticks(x0, x1):
        X = sx(t)
        out.append(f'<line x1="{X:.2f}" y1="{by + ph}" x2="{X:.2f}" y2="{by + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X:.2f}" y="{by + ph + 18}" text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(y0, y1):
        Y = sy(t)
        out.append(f'<line x1="{bx - 5}" y1="{Y:.2f}" x2="{bx}" y2="{Y:.2f}" stroke="black"/>')
        out.append(f'<text x="{bx - 8}" y="{Y + 4:.2f}" text-anchor="end">{_fmt(t)}</text>')
    if title:
        out.append(f'<text x="{bx + pw / 2:.1f}" y="24" text-anchor="middle" font-size="14">{escape(title)}</text>')
    if xlabel:
        out.append(f'<text x="{bx + pw / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(
            f'<text x="18" y="{by + ph / 2:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 18 {by + ph / 2:.1f})">{escape(ylabel)}</text>'
        )
    if reference_line:
        lo, hi = max(x0, y0), min(x1, y1)
        out.append(
            f'<line x1="{sx(lo):.2f}" y1="{sy(lo):.2f}" x2="{sx(hi):.2f}" y2="{sy(hi):.2f}" '
            'stroke="gray" stroke-dasharray="4 3"/>'
        )
    dashed = dashed or [False] * len(series)
    for i, (s, label) in enumerate(zip(series, labels)):
        color = COLORS[i % len(COLORS)]
        good = [(x, y) for x, y in s if math.isfinite(y)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in good)
        dash = ' stroke-dasharray="5 4"' if dashed[i] else ""
        if len(good) > 1:
            out.append(
                f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.8"{dash}/>'
            )
        for x, y in good:
            out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="2.5" fill="{color}"/>')
        ly = by + 14 + 18 * i
        lx = bx + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 22}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{lx + 28}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
