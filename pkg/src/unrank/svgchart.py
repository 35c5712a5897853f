"""Minimal SVG line charts, no plotting dependency.

Fixed canvas, one polyline per series, ticked axes, legend. Output is a
deterministic string for a given input.
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd",
    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
)

_MARGIN_LEFT = 70.0
_MARGIN_RIGHT = 150.0
_MARGIN_TOP = 40.0
_MARGIN_BOTTOM = 50.0


def _fmt(value: float) -> str:
    return f"{value:.6g}"


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw_step = (hi - lo) / count
    magnitude = 10.0 ** math.floor(math.log10(raw_step))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        step = magnitude * mult
        if step >= raw_step:
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + step * 1e-9:
        ticks.append(round(t, 12))
        t += step
    return ticks or [lo]


def line_chart(
    x_values: Sequence[float],
    series: Mapping[str, Sequence[float | None]],
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    width: int = 800,
    height: int = 500,
) -> str:
    """Render named series over shared x values; None points are skipped."""
    plot_w = width - _MARGIN_LEFT - _MARGIN_RIGHT
    plot_h = height - _MARGIN_TOP - _MARGIN_BOTTOM
    xs = [float(x) for x in x_values]
    ys = [float(v) for vals in series.values() for v in vals if v is not None]
    x_lo, x_hi = (min(xs), max(xs)) if xs else (0.0, 1.0)
    y_lo, y_hi = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def px(x: float) -> float:
        return _MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: float) -> float:
        return _MARGIN_TOP + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="15">{title}</text>'
        )

    axis_y = _MARGIN_TOP + plot_h
    parts.append(
        f'<line x1="{_MARGIN_LEFT:.1f}" y1="{axis_y:.1f}" x2="{_MARGIN_LEFT + plot_w:.1f}" '
        f'y2="{axis_y:.1f}" stroke="black"/>'
    )
    parts.append(
        f'<line x1="{_MARGIN_LEFT:.1f}" y1="{_MARGIN_TOP:.1f}" x2="{_MARGIN_LEFT:.1f}" '
        f'y2="{axis_y:.1f}" stroke="black"/>'
    )
    for t in _ticks(x_lo, x_hi):
        x = px(t)
        parts.append(f'<line x1="{x:.1f}" y1="{axis_y:.1f}" x2="{x:.1f}" y2="{axis_y + 5:.1f}" stroke="black"/>')
        parts.append(f'<text x="{x:.1f}" y="{axis_y + 18:.1f}" text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(y_lo, y_hi):
        y = py(t)
        parts.append(f'<line x1="{_MARGIN_LEFT - 5:.1f}" y1="{y:.1f}" x2="{_MARGIN_LEFT:.1f}" y2="{y:.1f}" stroke="black"/>')
        parts.append(f'<text x="{_MARGIN_LEFT - 8:.1f}" y="{y + 4:.1f}" text-anchor="end">{_fmt(t)}</text>')
    if x_label:
        parts.append(
            f'<text x="{_MARGIN_LEFT + plot_w / 2:.1f}" y="{height - 10:.1f}" text-anchor="middle">{x_label}</text>'
        )
    if y_label:
        cx, cy = 18.0, _MARGIN_TOP + plot_h / 2
        parts.append(
            f'<text x="{cx:.1f}" y="{cy:.1f}" text-anchor="middle" transform="rotate(-90 {cx:.1f} {cy:.1f})">{y_label}</text>'
        )

    legend_x = _MARGIN_LEFT + plot_w + 12
    for i, (name, values) in enumerate(series.items()):
        colour = PALETTE[i % len(PALETTE)]
        points = " ".join(
            f"{px(x):.2f},{py(v):.2f}" for x, v in zip(xs, values) if v is not None
        )
        if points:
            parts.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{points}"/>')
        ly = _MARGIN_TOP + 14 * i
        parts.append(f'<line x1="{legend_x:.1f}" y1="{ly + 5:.1f}" x2="{legend_x + 18:.1f}" y2="{ly + 5:.1f}" stroke="{colour}" stroke-width="1.5"/>')
        parts.append(f'<text x="{legend_x + 23:.1f}" y="{ly + 9:.1f}">{name}</text>')

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
