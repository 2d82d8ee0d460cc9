"""Static SVG figures without a plotting dependency."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PANEL_W, PANEL_H = 360, 260
MARGIN = 42
COLORS = ("#1f5fbf", "#c0392b", "#27ae60", "#8e44ad", "#d35400")


@dataclass
class BandPanel:
    title: str
    x: np.ndarray
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    points: tuple[np.ndarray, np.ndarray] | None = None
    truth: np.ndarray | None = None


@dataclass
class LinePanel:
    title: str
    xlabel: str
    series: dict[str, tuple[list, list]] = field(default_factory=dict)


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class _Axes:
    def __init__(self, ox, oy, xlim, ylim):
        self.ox, self.oy = ox, oy
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 == self.y0:
            self.y1 = self.y0 + 1.0

    def px(self, x):
        return self.ox + MARGIN + (np.asarray(x) - self.x0) / (self.x1 - self.x0) * (PANEL_W - 2 * MARGIN)

    def py(self, y):
        return self.oy + PANEL_H - MARGIN - (np.asarray(y) - self.y0) / (self.y1 - self.y0) * (PANEL_H - 2 * MARGIN)

    def frame(self, title, xlabel=""):
        out = [
            f'<rect x="{_fmt(self.ox + MARGIN)}" y="{_fmt(self.oy + MARGIN)}" '
            f'width="{PANEL_W - 2 * MARGIN}" height="{PANEL_H - 2 * MARGIN}" '
            'fill="none" stroke="#333" stroke-width="0.8"/>',
            f'<text x="{_fmt(self.ox + PANEL_W / 2)}" y="{_fmt(self.oy + MARGIN - 10)}" '
            f'text-anchor="middle" font-size="12">{escape(title)}</text>',
        ]
        for val, anchor in ((self.x0, "start"), (self.x1, "end")):
            out.append(f'<text x="{_fmt(self.px(val))}" y="{_fmt(self.oy + PANEL_H - MARGIN + 14)}" '
                       f'text-anchor="{anchor}" font-size="9">{val:.3g}</text>')
        for val in (self.y0, self.y1):
            out.append(f'<text x="{_fmt(self.ox + MARGIN - 4)}" y="{_fmt(self.py(val) + 3)}" '
                       f'text-anchor="end" font-size="9">{val:.3g}</text>')
        if xlabel:
            out.append(f'<text x="{_fmt(self.ox + PANEL_W / 2)}" y="{_fmt(self.oy + PANEL_H - 8)}" '
                       f'text-anchor="middle" font-size="10">{escape(xlabel)}</text>')
        return out

    def polyline(self, x, y, color, width=1.5, dash=None):
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(self.px(x), self.py(y)))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}"{extra}/>'


def _band_svg(panel: BandPanel, ox, oy):
    ys = [panel.lower, panel.upper]
    if panel.points is not None:
        ys.append(panel.points[1])
    lo = float(min(np.min(a) for a in ys))
    hi = float(max(np.max(a) for a in ys))
    ax = _Axes(ox, oy, (float(np.min(panel.x)), float(np.max(panel.x))), (lo, hi))
    out = ax.frame(panel.title)
    upper = list(zip(ax.px(panel.x), ax.py(panel.upper)))
    lower = list(zip(ax.px(panel.x), ax.py(panel.lower)))[::-1]
    pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in upper + lower)
    out.append(f'<polygon points="{pts}" fill="{COLORS[0]}" fill-opacity="0.25" stroke="none"/>')
    if panel.points is not None:
        for a, b in zip(ax.px(panel.points[0]), ax.py(panel.points[1])):
            out.append(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="1.3" fill="{COLORS[1]}" fill-opacity="0.5"/>')
    if panel.truth is not None:
        out.append(ax.polyline(panel.x, panel.truth, COLORS[1], 1.2, "4,2"))
    out.append(ax.polyline(panel.x, panel.mean, COLORS[0]))
    return out


def _line_svg(panel: LinePanel, ox, oy):
    xs = [v for xs_, _ in panel.series.values() for v in xs_]
    ys = [v for _, ys_ in panel.series.values() for v in ys_ if v is not None]
    ax = _Axes(ox, oy, (min(xs), max(xs)), (min(ys + [0.0]), max(ys + [1e-12])))
    out = ax.frame(panel.title, panel.xlabel)
    for i, (name, (sx, sy)) in enumerate(panel.series.items()):
        color = COLORS[i % len(COLORS)]
        pairs = [(a, b) for a, b in zip(sx, sy) if b is not None]
        if pairs:
            out.append(ax.polyline([p[0] for p in pairs], [p[1] for p in pairs], color))
            for a, b in zip(ax.px([p[0] for p in pairs]), ax.py([p[1] for p in pairs])):
                out.append(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="2.5" fill="{color}"/>')
        out.append(f'<text x="{_fmt(ox + MARGIN + 6)}" y="{_fmt(oy + MARGIN + 14 + 12 * i)}" '
                   f'font-size="10" fill="{color}">{escape(name)}</text>')
    return out


def write_svg(panels, path, ncols: int = 2) -> Path:
    """Lay out panels on a grid and write one SVG file."""
    nrows = (len(panels) + ncols - 1) // ncols
    width, height = PANEL_W * ncols, PANEL_H * nrows
    body = []
    for i, panel in enumerate(panels):
        ox, oy = PANEL_W * (i % ncols), PANEL_H * (i // ncols)
        if isinstance(panel, BandPanel):
            body += _band_svg(panel, ox, oy)
        else:
            body += _line_svg(panel, ox, oy)
    svg = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif">\n'
           f'<rect width="{width}" height="{height}" fill="white"/>\n'
           + "\n".join(body) + "\n</svg>\n")
    path = Path(path)
    path.write_text(svg)
    return path
