"""Minimal deterministic SVG line charts (numbers printed with %.9g)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence
from xml.sax.saxutils import escape

PALETTE = ("#1f5fbf", "#c0392b", "#2e8b57", "#8e44ad", "#d4a017")


def _f(v: float) -> str:
    return "%.9g" % v


@dataclass
class Series:
    label: str
    x: Sequence[float]
    y: Sequence[float]
    color: Optional[str] = None
    dashed: bool = False
    markers: bool = False
    yerr: Optional[Sequence[float]] = None


@dataclass
class Panel:
    title: str
    xlabel: str = ""
    ylabel: str = ""
    series: list[Series] = field(default_factory=list)
    zero_line: bool = True


def _range(panel: Panel) -> tuple[float, float, float, float]:
    xs = [v for s in panel.series for v in s.x]
    ys = []
    for s in panel.series:
        err = s.yerr or [0.0] * len(s.y)
        for v, e in zip(s.y, err):
            ys += [v - e, v + e]
    if panel.zero_line:
        ys.append(0.0)
    xs = [v for v in xs if math.isfinite(v)] or [0.0, 1.0]
    ys = [v for v in ys if math.isfinite(v)] or [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    pad = 0.05 * (y1 - y0) if y1 > y0 else 0.5
    return x0, x1, y0 - pad, y1 + pad


def _panel_svg(panel: Panel, ox: float, oy: float, w: float, h: float) -> list[str]:
    left, right, top, bottom = 58.0, 12.0, 26.0, 40.0
    pw, ph = w - left - right, h - top - bottom
    x0, x1, y0, y1 = _range(panel)

    def px(v):
        return ox + left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return oy + top + (y1 - v) / (y1 - y0) * ph

    out = [
        f'<rect x="{_f(ox + left)}" y="{_f(oy + top)}" width="{_f(pw)}" height="{_f(ph)}" '
        f'fill="none" stroke="#333" stroke-width="1"/>',
        f'<text x="{_f(ox + left + pw / 2)}" y="{_f(oy + top - 8)}" text-anchor="middle" '
        f'font-size="12">{escape(panel.title)}</text>',
        f'<text x="{_f(ox + left + pw / 2)}" y="{_f(oy + h - 6)}" text-anchor="middle" '
        f'font-size="11">{escape(panel.xlabel)}</text>',
        f'<text x="{_f(ox + 12)}" y="{_f(oy + top + ph / 2)}" text-anchor="middle" font-size="11" '
        f'transform="rotate(-90 {_f(ox + 12)} {_f(oy + top + ph / 2)})">{escape(panel.ylabel)}</text>',
    ]
    for k in range(5):
        xv = x0 + (x1 - x0) * k / 4
        yv = y0 + (y1 - y0) * k / 4
        out.append(f'<text x="{_f(px(xv))}" y="{_f(oy + top + ph + 14)}" text-anchor="middle" '
                   f'font-size="9">{"%.3g" % xv}</text>')
        out.append(f'<text x="{_f(ox + left - 4)}" y="{_f(py(yv) + 3)}" text-anchor="end" '
                   f'font-size="9">{"%.3g" % yv}</text>')
    if panel.zero_line and y0 < 0 < y1:
        out.append(f'<line x1="{_f(px(x0))}" y1="{_f(py(0))}" x2="{_f(px(x1))}" y2="{_f(py(0))}" '
                   f'stroke="#999" stroke-width="0.5"/>')
    for i, s in enumerate(panel.series):
        color = s.color or PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_f(px(a))},{_f(py(b))}" for a, b in zip(s.x, s.y)
                       if math.isfinite(a) and math.isfinite(b))
        dash = ' stroke-dasharray="4 3"' if s.dashed else ""
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
        if s.markers or s.yerr:
            for j, (a, b) in enumerate(zip(s.x, s.y)):
                out.append(f'<circle cx="{_f(px(a))}" cy="{_f(py(b))}" r="2" fill="{color}"/>')
                if s.yerr:
                    e = s.yerr[j]
                    out.append(f'<line x1="{_f(px(a))}" y1="{_f(py(b - e))}" x2="{_f(px(a))}" '
                               f'y2="{_f(py(b + e))}" stroke="{color}" stroke-width="0.8"/>')
        ly = oy + top + 12 + 12 * i
        out.append(f'<line x1="{_f(ox + left + 6)}" y1="{_f(ly - 3)}" x2="{_f(ox + left + 20)}" '
                   f'y2="{_f(ly - 3)}" stroke="{color}" stroke-width="1.5"{dash}/>')
        out.append(f'<text x="{_f(ox + left + 24)}" y="{_f(ly)}" font-size="9">{escape(s.label)}</text>')
    return out


def render(panels: Sequence[Panel], columns: Optional[int] = None,
           panel_width: float = 320, panel_height: float = 240) -> str:
    columns = columns or len(panels)
    rows = math.ceil(len(panels) / columns)
    width, height = columns * panel_width, rows * panel_height
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(width)}" height="{_f(height)}" '
        f'viewBox="0 0 {_f(width)} {_f(height)}" font-family="sans-serif">',
        f'<rect width="{_f(width)}" height="{_f(height)}" fill="white"/>',
    ]
    for k, panel in enumerate(panels):
        r, c = divmod(k, columns)
        parts += _panel_svg(panel, c * panel_width, r * panel_height, panel_width, panel_height)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(path, panels: Sequence[Panel], **kwargs) -> None:
    Path(path).write_text(render(panels, **kwargs))
