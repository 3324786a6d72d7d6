"""Dependency-free SVG charts with byte-stable output.

A figure is a main panel of line/marker series and an optional lower panel
of bars sharing the x axis (daily submissions under a Submit Line).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence
from xml.sax.saxutils import escape

from .errors import EmptySeries

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


@dataclass(frozen=True)
class Series:
    label: str
    points: Sequence[tuple[float, float]]
    kind: str = "line"  # line | markers | both


@dataclass(frozen=True)
class FigureSpec:
    title: str
    x_label: str
    y_label: str
    series: Sequence[Series]
    bars: Sequence[Series] = field(default_factory=tuple)
    bars_label: str = "per day"
    x_range: Optional[tuple[float, float]] = None
    log_x: bool = False  # x values are positive; axis is logarithmic
    y_min: Optional[float] = 0.0
    width: int = 720
    height: int = 440


def nice_ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / max(target, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    v = first
    while v <= hi + step * 1e-9:
        ticks.append(round(v, 10))
        v += step
    return ticks


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _label(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else f"{v:g}"


def log_ticks(lo: float, hi: float) -> list[float]:
    ticks = []
    decade = 10 ** math.floor(math.log10(lo))
    while decade <= hi:
        for m in (1, 2, 5):
            if lo <= m * decade <= hi:
                ticks.append(float(m * decade))
        decade *= 10
    return ticks or [lo]


class _Scale:
    def __init__(self, lo: float, hi: float, px_lo: float, px_hi: float, log: bool = False):
        self.f = math.log if log else (lambda v: v)
        lo, hi = self.f(lo), self.f(hi)
        if hi == lo:
            lo, hi = lo - 1.0, hi + 1.0
        self.lo, self.hi, self.px_lo, self.px_hi = lo, hi, px_lo, px_hi

    def __call__(self, v: float) -> float:
        return self.px_lo + (self.f(v) - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)


def render_svg(spec: FigureSpec) -> str:
    """Render ``spec`` to an SVG document string."""
    all_series = list(spec.series) + list(spec.bars)
    if not spec.series or any(len(s.points) == 0 for s in all_series):
        raise EmptySeries("every series in a figure needs at least one point")

    xs = [x for s in all_series for x, _ in s.points]
    ys = [y for s in spec.series for _, y in s.points]
    x_lo, x_hi = spec.x_range if spec.x_range else (min(xs), max(xs))
    if spec.log_x and (x_lo <= 0 or min(xs) <= 0):
        raise ValueError("log_x needs strictly positive x values")
    y_lo = min(ys) if spec.y_min is None else min(spec.y_min, min(ys))
    y_hi = max(ys)
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    w, h = spec.width, spec.height
    left, right, top = 70, 150, 44
    bar_h = 90 if spec.bars else 0
    gap = 36 if spec.bars else 0
    bottom = 50
    main_bottom = h - bottom - bar_h - gap
    sx = _Scale(x_lo, x_hi, left, w - right, log=spec.log_x)
    sy = _Scale(y_lo, y_hi, main_bottom, top)

    out: list[str] = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" '
        f'font-family="Helvetica, Arial, sans-serif">',
        f'<rect x="0" y="0" width="{w}" height="{h}" fill="#ffffff"/>',
        f'<text x="{_fmt(w / 2)}" y="24" text-anchor="middle" font-size="16">{escape(spec.title)}</text>',
    ]

    # main panel axes and grid
    for t in nice_ticks(y_lo, y_hi):
        y = sy(t)
        out.append(f'<line x1="{left}" y1="{_fmt(y)}" x2="{w - right}" y2="{_fmt(y)}" stroke="#e5e5e5"/>')
        out.append(f'<text x="{left - 6}" y="{_fmt(y + 4)}" text-anchor="end" font-size="11">{_label(t)}</text>')
    out.append(f'<line x1="{left}" y1="{main_bottom}" x2="{w - right}" y2="{main_bottom}" stroke="#000000"/>')
    out.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{main_bottom}" stroke="#000000"/>')
    axis_bottom = h - bottom if spec.bars else main_bottom
    for t in (log_ticks(x_lo, x_hi) if spec.log_x else nice_ticks(x_lo, x_hi)):
        x = sx(t)
        out.append(f'<line x1="{_fmt(x)}" y1="{axis_bottom}" x2="{_fmt(x)}" y2="{axis_bottom + 5}" stroke="#000000"/>')
        out.append(f'<text x="{_fmt(x)}" y="{axis_bottom + 18}" text-anchor="middle" font-size="11">{_label(t)}</text>')
    out.append(f'<text x="{_fmt((left + w - right) / 2)}" y="{h - 12}" text-anchor="middle" font-size="12">'
               f'{escape(spec.x_label)}</text>')
    cy = (top + main_bottom) / 2
    out.append(f'<text x="18" y="{_fmt(cy)}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 18 {_fmt(cy)})">{escape(spec.y_label)}</text>')

    for i, s in enumerate(spec.series):
        color = COLORS[i % len(COLORS)]
        pts = sorted(s.points)
        if s.kind in ("line", "both") and len(pts) >= 2:
            coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in pts)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
        if s.kind in ("markers", "both") or len(pts) == 1:
            for x, y in pts:
                out.append(f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="3" fill="{color}"/>')
        ly = top + 8 + 18 * i
        out.append(f'<rect x="{w - right + 12}" y="{ly - 6}" width="14" height="4" fill="{color}"/>')
        out.append(f'<text x="{w - right + 32}" y="{ly}" font-size="11">{escape(s.label)}</text>')

    if spec.bars:
        b_top = main_bottom + gap
        b_bottom = h - bottom
        b_hi = max(y for s in spec.bars for _, y in s.points) or 1.0
        by = _Scale(0.0, b_hi, b_bottom, b_top)
        out.append(f'<line x1="{left}" y1="{b_bottom}" x2="{w - right}" y2="{b_bottom}" stroke="#000000"/>')
        out.append(f'<line x1="{left}" y1="{b_top}" x2="{left}" y2="{b_bottom}" stroke="#000000"/>')
        out.append(f'<text x="{left - 6}" y="{b_top + 4}" text-anchor="end" font-size="11">{_label(b_hi)}</text>')
        out.append(f'<text x="{left - 6}" y="{b_bottom}" text-anchor="end" font-size="11">0</text>')
        bcy = (b_top + b_bottom) / 2
        out.append(f'<text x="18" y="{_fmt(bcy)}" text-anchor="middle" font-size="12" '
                   f'transform="rotate(-90 18 {_fmt(bcy)})">{escape(spec.bars_label)}</text>')
        n = len(spec.bars)
        if spec.log_x:
            bw = 4.0
        else:
            span = (w - right - left) / max(x_hi - x_lo + 1, 1)
            bw = max(span * 0.8 / n, 1.0)
        for i, s in enumerate(spec.bars):
            color = COLORS[i % len(COLORS)]
            for x, y in sorted(s.points):
                x0 = sx(x) - bw * n / 2 + i * bw
                out.append(f'<rect x="{_fmt(x0)}" y="{_fmt(by(y))}" width="{_fmt(bw)}" '
                           f'height="{_fmt(b_bottom - by(y))}" fill="{color}" fill-opacity="0.7">'
                           f'<title>{escape(s.label)}: {_label(y)}</title></rect>')

    out.append("</svg>")
    return "\n".join(out) + "\n"

