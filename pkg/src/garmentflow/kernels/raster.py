"""Triangle scan conversion to per-pixel (face, barycentric) records.

Pixel ``(x, y)`` is sampled at the point ``(x, y)`` in mesh coordinates.
Edges are inclusive (tolerance ``INSIDE_EPS``); a pixel inside several faces
keeps the face with the larger part id, ties going to the smaller face index.
"""

from __future__ import annotations

import math

import numpy as np

from .._accel import njit, pick

INSIDE_EPS = 1e-9
# twice the 1e-9 px^2 signed-area floor
DEGENERATE_AREA2 = 2e-9


@njit
def _rasterize_numba(verts, faces, parts, width, height):
    face_idx = np.full((height, width), -1, dtype=np.int32)
    bary = np.zeros((height, width, 3), dtype=np.float64)
    n_degenerate = 0
    for f in range(faces.shape[0]):
        i = faces[f, 0]
        j = faces[f, 1]
        k = faces[f, 2]
        x0 = verts[i, 0]
        y0 = verts[i, 1]
        x1 = verts[j, 0]
        y1 = verts[j, 1]
        x2 = verts[k, 0]
        y2 = verts[k, 1]
        area2 = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if abs(area2) <= DEGENERATE_AREA2:
            n_degenerate += 1
            continue
        xmin = max(0, int(math.ceil(min(x0, min(x1, x2)) - INSIDE_EPS)))
        xmax = min(width - 1, int(math.floor(max(x0, max(x1, x2)) + INSIDE_EPS)))
        ymin = max(0, int(math.ceil(min(y0, min(y1, y2)) - INSIDE_EPS)))
        ymax = min(height - 1, int(math.floor(max(y0, max(y1, y2)) + INSIDE_EPS)))
        part = parts[f]
        for py in range(ymin, ymax + 1):
            for px in range(xmin, xmax + 1):
                b1 = ((px - x0) * (y2 - y0) - (x2 - x0) * (py - y0)) / area2
                b2 = ((x1 - x0) * (py - y0) - (px - x0) * (y1 - y0)) / area2
                b0 = 1.0 - b1 - b2
                if b0 < -INSIDE_EPS or b1 < -INSIDE_EPS or b2 < -INSIDE_EPS:
                    continue
                cur = face_idx[py, px]
                if cur >= 0 and part <= parts[cur]:
                    continue
                if b0 < 0.0 or b1 < 0.0 or b2 < 0.0:
                    b0 = max(b0, 0.0)
                    b1 = max(b1, 0.0)
                    b2 = max(b2, 0.0)
                    s = b0 + b1 + b2
                    b0 = b0 / s
                    b1 = b1 / s
                    b2 = b2 / s
                face_idx[py, px] = f
                bary[py, px, 0] = b0
                bary[py, px, 1] = b1
                bary[py, px, 2] = b2
    return face_idx, bary, n_degenerate


def _rasterize_numpy(verts, faces, parts, width, height):
    face_idx = np.full((height, width), -1, dtype=np.int32)
    bary = np.zeros((height, width, 3), dtype=np.float64)
    n_degenerate = 0
    for f in range(faces.shape[0]):
        (x0, y0), (x1, y1), (x2, y2) = verts[faces[f]]
        area2 = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if abs(area2) <= DEGENERATE_AREA2:
            n_degenerate += 1
            continue
        xmin = max(0, int(math.ceil(min(x0, x1, x2) - INSIDE_EPS)))
        xmax = min(width - 1, int(math.floor(max(x0, x1, x2) + INSIDE_EPS)))
        ymin = max(0, int(math.ceil(min(y0, y1, y2) - INSIDE_EPS)))
        ymax = min(height - 1, int(math.floor(max(y0, y1, y2) + INSIDE_EPS)))
        if xmin > xmax or ymin > ymax:
            continue
        py, px = np.mgrid[ymin : ymax + 1, xmin : xmax + 1].astype(np.float64)
        b1 = ((px - x0) * (y2 - y0) - (x2 - x0) * (py - y0)) / area2
        b2 = ((x1 - x0) * (py - y0) - (px - x0) * (y1 - y0)) / area2
        b0 = 1.0 - b1 - b2
        inside = (b0 >= -INSIDE_EPS) & (b1 >= -INSIDE_EPS) & (b2 >= -INSIDE_EPS)
        cur = face_idx[ymin : ymax + 1, xmin : xmax + 1]
        cur_part = np.where(cur >= 0, parts[np.maximum(cur, 0)], np.iinfo(np.int64).min)
        take = inside & ((cur < 0) | (parts[f] > cur_part))
        if not take.any():
            continue
        b = np.stack([b0, b1, b2], axis=-1)
        neg = (b < 0.0).any(axis=-1)
        if neg.any():
            clipped = np.maximum(b[neg], 0.0)
            s = clipped[:, 0] + clipped[:, 1] + clipped[:, 2]
            b[neg] = clipped / s[:, None]
        cur[take] = f
        bary[ymin : ymax + 1, xmin : xmax + 1][take] = b[take]
    return face_idx, bary, n_degenerate


rasterize_faces = pick(_rasterize_numba, _rasterize_numpy)
