"""Bare-bones SVG line/dot plots; no plotting library needed."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")

W, H = 480, 340
MARGIN = dict(left=60, right=20, top=30, bottom=45)


@dataclass
class Series:
    x: list
    y: list
    label: str = ""
    color: str | None = None
    dots: bool = False


@dataclass
class Panel:
    title: str
    xlabel: str
    ylabel: str
    series: list[Series] = field(default_factory=list)

    def add(self, x, y, label="", color=None, dots=False) -> "Panel":
        self.series.append(Series(list(map(float, x)), list(map(float, y)), label, color, dots))
        return self


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    out, v = [], start
    while v <= hi + 1e-9 * step:
        out.append(round(v, 12))
        v += step
    return out


def _panel_svg(panel: Panel, ox: float) -> list[str]:
    xs = [v for s in panel.series for v in s.x if math.isfinite(v)]
    ys = [v for s in panel.series for v in s.y if math.isfinite(v)]
    x0, x1 = (min(xs), max(xs)) if xs else (0.0, 1.0)
    y0, y1 = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw = W - MARGIN["left"] - MARGIN["right"]
    ph = H - MARGIN["top"] - MARGIN["bottom"]
    left, top = ox + MARGIN["left"], MARGIN["top"]

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + ph - (y - y0) / (y1 - y0) * ph

    out = [f'<g class="panel">', f'<text x="{left + pw / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(panel.title)}</text>']
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for tx in _ticks(x0, x1):
        out.append(f'<text x="{px(tx):.1f}" y="{top + ph + 15}" text-anchor="middle" font-size="10">{tx:g}</text>')
    for ty in _ticks(y0, y1):
        out.append(f'<text x="{left - 5}" y="{py(ty) + 3:.1f}" text-anchor="end" font-size="10">{ty:g}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{H - 8}" text-anchor="middle" font-size="11">{escape(panel.xlabel)}</text>')
    out.append(
        f'<text x="{ox + 14}" y="{top + ph / 2:.1f}" text-anchor="middle" font-size="11" '
        f'transform="rotate(-90 {ox + 14} {top + ph / 2:.1f})">{escape(panel.ylabel)}</text>'
    )
    for i, s in enumerate(panel.series):
        color = s.color or PALETTE[i % len(PALETTE)]
        pts = [(px(x), py(y)) for x, y in zip(s.x, s.y) if math.isfinite(x) and math.isfinite(y)]
        if s.dots:
            out.extend(f'<circle cx="{a:.1f}" cy="{b:.1f}" r="1.6" fill="{color}"/>' for a, b in pts)
        elif pts:
            path = " ".join(f"{a:.1f},{b:.1f}" for a, b in pts)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{path}"><title>{escape(s.label)}</title></polyline>')
        if s.label:
            out.append(f'<text x="{left + pw - 4}" y="{top + 14 + 12 * i}" text-anchor="end" font-size="10" fill="{color}">{escape(s.label)}</text>')
    out.append("</g>")
    return out


def render(panels: list[Panel]) -> str:
    width = W * len(panels)
    body = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{H}" viewBox="0 0 {width} {H}">']
    body.append(f'<rect width="{width}" height="{H}" fill="white"/>')
    for i, panel in enumerate(panels):
        body.extend(_panel_svg(panel, i * W))
    body.append("</svg>")
    return "\n".join(body) + "\n"


def save(path, panels: list[Panel]) -> None:
    with open(path, "w") as fh:
        fh.write(render(panels))
