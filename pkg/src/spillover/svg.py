"""Minimal deterministic SVG scatter plots with optional depth bands."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH = HEIGHT = 480
PAD = 40

MARKERS = {
    "circle": '<circle cx="{x:.2f}" cy="{y:.2f}" r="{r}" fill="{c}" fill-opacity="0.75"/>',
    "square": '<rect x="{x0:.2f}" y="{y0:.2f}" width="{d}" height="{d}" fill="{c}"/>',
    "cross": (
        '<path d="M{x0:.2f},{y0:.2f}L{x1:.2f},{y1:.2f}M{x0:.2f},{y1:.2f}L{x1:.2f},{y0:.2f}" '
        'stroke="{c}" stroke-width="2"/>'
    ),
    "ring": '<circle cx="{x:.2f}" cy="{y:.2f}" r="{r}" fill="none" stroke="{c}" stroke-width="2"/>',
}


@dataclass
class Layer:
    points: np.ndarray
    color: str
    marker: str = "circle"
    label: str = ""
    size: int = 3


class _Frame:
    def __init__(self, points: np.ndarray):
        lo = points.min(axis=0)
        hi = points.max(axis=0)
        span = np.where(hi - lo > 0, hi - lo, 1.0)
        self.lo = lo - 0.05 * span
        self.hi = hi + 0.05 * span

    def __call__(self, p):
        p = np.atleast_2d(p)
        sx = PAD + (p[:, 0] - self.lo[0]) / (self.hi[0] - self.lo[0]) * (WIDTH - 2 * PAD)
        sy = HEIGHT - PAD - (p[:, 1] - self.lo[1]) / (self.hi[1] - self.lo[1]) * (HEIGHT - 2 * PAD)
        return np.column_stack([sx, sy])


def _marker(kind, x, y, size, color):
    return MARKERS[kind].format(
        x=x, y=y, r=size, c=color, d=2 * size,
        x0=x - size, y0=y - size, x1=x + size, y1=y + size,
    )


def scatter_svg(
    layers: Sequence[Layer],
    title: str = "",
    field: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    levels: float = 0.1,
    grid: int = 48,
) -> str:
    """Render layers of 2-D points; ``field`` adds banded depth levels.

    Bands are cells shaded by ``floor(field / levels)``, which traces
    approximate equi-depth contours at spacing ``levels``.
    """
    allpts = np.vstack([np.atleast_2d(l.points) for l in layers if len(l.points)])
    frame = _Frame(allpts)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if field is not None:
        xs = np.linspace(frame.lo[0], frame.hi[0], grid + 1)
        ys = np.linspace(frame.lo[1], frame.hi[1], grid + 1)
        cx = 0.5 * (xs[:-1] + xs[1:])
        cy = 0.5 * (ys[:-1] + ys[1:])
        gx, gy = np.meshgrid(cx, cy)
        vals = np.asarray(field(np.column_stack([gx.ravel(), gy.ravel()]))).reshape(gx.shape)
        band = np.floor(vals / levels)
        top = max(band.max(), 1.0)
        cw = (WIDTH - 2 * PAD) / grid
        ch = (HEIGHT - 2 * PAD) / grid
        for i in range(grid):
            for j in range(grid):
                shade = int(255 - 120 * band[i, j] / top)
                x0, y1 = frame(np.array([xs[j], ys[i]]))[0]
                out.append(
                    f'<rect x="{x0:.2f}" y="{y1 - ch:.2f}" width="{cw:.2f}" height="{ch:.2f}" '
                    f'fill="rgb({shade},{shade},255)" stroke="none"/>'
                )
    for layer in layers:
        if not len(layer.points):
            continue
        for sx, sy in frame(np.asarray(layer.points, dtype=float)):
            out.append(_marker(layer.marker, sx, sy, layer.size, layer.color))
    if title:
        out.append(f'<text x="{PAD}" y="{PAD - 14}" font-family="sans-serif" font-size="14">{escape(title)}</text>')
    legend_y = HEIGHT - 12
    x = PAD
    for layer in layers:
        if layer.label:
            out.append(_marker(layer.marker, x, legend_y - 4, 4, layer.color))
            out.append(
                f'<text x="{x + 8}" y="{legend_y}" font-family="sans-serif" font-size="11">{escape(layer.label)}</text>'
            )
            x += 14 + 7 * len(layer.label)
    out.append("</svg>")
    return "\n".join(out) + "\n"
