"""Flow colour coding and a dependency-free SVG line plot."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .flowfield import FlowField


def _hsv_to_rgb(h, s, v):
    i = np.floor(h * 6.0).astype(int) % 6
    f = h * 6.0 - np.floor(h * 6.0)
    p = v * (1.0 - s)
    q = v * (1.0 - f * s)
    t = v * (1.0 - (1.0 - f) * s)
    choices = [
        np.stack([v, t, p], -1),
        np.stack([q, v, p], -1),
        np.stack([p, v, t], -1),
        np.stack([p, q, v], -1),
        np.stack([t, p, v], -1),
        np.stack([v, p, q], -1),
    ]
    out = np.zeros(h.shape + (3,))
    for k, c in enumerate(choices):
        out[i == k] = c[i == k]
    return out


def flow_to_color(flow: FlowField, max_magnitude: float | None = None) -> np.ndarray:
    """Hue encodes direction, saturation the magnitude; invalid pixels are black."""
    u, v = flow.uv[..., 0], flow.uv[..., 1]
    mag = np.hypot(u, v)
    if max_magnitude is None:
        max_magnitude = float(mag[flow.valid].max()) if flow.valid.any() else 0.0
    scale = max_magnitude if max_magnitude > 0 else 1.0
    hue = (np.arctan2(-v, -u) / math.pi + 1.0) / 2.0
    rgb = _hsv_to_rgb(hue, np.clip(mag / scale, 0.0, 1.0), np.ones_like(mag))
    rgb[~flow.valid] = 0.0
    return rgb


def svg_line_plot(path, ys, title: str = "", xlabel: str = "iteration", ylabel: str = "") -> None:
    """Write a minimal SVG polyline of ``ys`` against their index."""
    ys = [float(y) for y in ys]
    w, h, m = 480, 320, 48
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
        f'<rect width="{w}" height="{h}" fill="white"/>',
        f'<line x1="{m}" y1="{h - m}" x2="{w - m}" y2="{h - m}" stroke="black"/>',
        f'<line x1="{m}" y1="{m}" x2="{m}" y2="{h - m}" stroke="black"/>',
    ]
    if title:
        lines.append(f'<text x="{w / 2}" y="{m / 2}" text-anchor="middle" font-size="14">{title}</text>')
    lines.append(f'<text x="{w / 2}" y="{h - 10}" text-anchor="middle" font-size="12">{xlabel}</text>')
    if ylabel:
        lines.append(
            f'<text x="14" y="{h / 2}" text-anchor="middle" font-size="12" '
            f'transform="rotate(-90 14 {h / 2})">{ylabel}</text>'
        )
    finite = [y for y in ys if math.isfinite(y)]
    if finite:
        lo, hi = min(finite), max(finite)
        span = hi - lo if hi > lo else 1.0
        n = max(len(ys) - 1, 1)
        pts = []
        for i, y in enumerate(ys):
            if not math.isfinite(y):
                continue
            px = m + (w - 2 * m) * i / n
            py = h - m - (h - 2 * m) * (y - lo) / span
            pts.append(f"{px:.2f},{py:.2f}")
        lines.append(f'<polyline fill="none" stroke="#1f4e9c" stroke-width="2" points="{" ".join(pts)}"/>')
        lines.append(f'<text x="{m - 4}" y="{m + 4}" text-anchor="end" font-size="10">{hi:.4g}</text>')
        lines.append(f'<text x="{m - 4}" y="{h - m}" text-anchor="end" font-size="10">{lo:.4g}</text>')
    lines.append("</svg>")
    Path(path).write_text("\n".join(lines) + "\n")
