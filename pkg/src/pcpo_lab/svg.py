"""Minimal SVG line charts (no plotting dependency)."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def line_chart(series: dict, title: str = "", xlabel: str = "", ylabel: str = "", hline: float | None = None,
               width: int = 640, height: int = 400) -> str:
    """``series`` maps a label to y values (x is the index) or to an ``(x, y)`` pair."""
    left, right, top, bottom = 60, 20, 30, 45
    curves = {}
    for name, data in series.items():
        if isinstance(data, tuple):
            x, y = np.asarray(data[0], float), np.asarray(data[1], float)
        else:
            y = np.asarray(data, float)
            x = np.arange(y.size, dtype=float)
        curves[name] = (x, y)
    xs = np.concatenate([c[0] for c in curves.values()]) if curves else np.zeros(1)
    ys = np.concatenate([c[1] for c in curves.values()]) if curves else np.zeros(1)
    if hline is not None:
        ys = np.append(ys, hline)
    xs, ys = xs[np.isfinite(xs)], ys[np.isfinite(ys)]
    x0, x1 = (float(xs.min()), float(xs.max())) if xs.size else (0.0, 1.0)
    y0, y1 = (float(ys.min()), float(ys.max())) if ys.size else (0.0, 1.0)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    pw, ph = width - left - right, height - top - bottom

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + (y1 - y) / (y1 - y0) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="white" stroke="black"/>',
        f'<text x="{width / 2}" y="18" text-anchor="middle">{escape(title)}</text>',
        f'<text x="{left + pw / 2}" y="{height - 8}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="14" y="{top + ph / 2}" text-anchor="middle" transform="rotate(-90 14 {top + ph / 2})">{escape(ylabel)}</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        yv = y0 + frac * (y1 - y0)
        xv = x0 + frac * (x1 - x0)
        parts.append(f'<text x="{left - 4}" y="{py(yv) + 4:.1f}" text-anchor="end">{yv:.3g}</text>')
        parts.append(f'<text x="{px(xv):.1f}" y="{top + ph + 16}" text-anchor="middle">{xv:.3g}</text>')
    if hline is not None:
        parts.append(f'<line x1="{left}" x2="{left + pw}" y1="{py(hline):.1f}" y2="{py(hline):.1f}" '
                     'stroke="gray" stroke-dasharray="6,4"/>')
    for k, (name, (x, y)) in enumerate(curves.items()):
        color = PALETTE[k % len(PALETTE)]
        ok = np.isfinite(x) & np.isfinite(y)
        pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(x[ok], y[ok]))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        parts.append(f'<text x="{left + 8}" y="{top + 16 + 14 * k}" fill="{color}">{escape(str(name))}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_line_chart(path, series: dict, **kwargs) -> None:
    Path(path).write_text(line_chart(series, **kwargs))
