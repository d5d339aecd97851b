"""Local correlation volume between two feature maps.

``score[y, x, n] = <a[y, x], b[y + by + dy, x + bx + dx]>`` where ``(bx, by)``
is a per-pixel integer base offset and ``n`` enumerates ``(dy, dx)`` in
``[-D, D]^2`` row-major (``dy`` outer).  Lookups outside ``b`` score -1.
"""

from __future__ import annotations

import numpy as np

from .._accel import njit, pick

OUT_OF_RANGE = -1.0


@njit
def _correlate_numba(fa, fb, base_dx, base_dy, max_disp):
    h, w, nd = fa.shape
    side = 2 * max_disp + 1
    out = np.empty((h, w, side * side), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            n = 0
            for dy in range(-max_disp, max_disp + 1):
                ty = y + base_dy[y, x] + dy
                for dx in range(-max_disp, max_disp + 1):
                    tx = x + base_dx[y, x] + dx
                    if ty < 0 or ty >= h or tx < 0 or tx >= w:
                        out[y, x, n] = OUT_OF_RANGE
                    else:
                        acc = 0.0
                        for k in range(nd):
                            acc += np.float64(fa[y, x, k]) * np.float64(fb[ty, tx, k])
                        out[y, x, n] = acc
                    n += 1
    return out


def _correlate_numpy(fa, fb, base_dx, base_dy, max_disp):
    h, w, _ = fa.shape
    side = 2 * max_disp + 1
    out = np.empty((h, w, side * side), dtype=np.float64)
    ys, xs = np.mgrid[0:h, 0:w]
    fa64 = fa.astype(np.float64)
    n = 0
    for dy in range(-max_disp, max_disp + 1):
        ty = ys + base_dy + dy
        for dx in range(-max_disp, max_disp + 1):
            tx = xs + base_dx + dx
            ok = (ty >= 0) & (ty < h) & (tx >= 0) & (tx < w)
            gathered = fb[np.clip(ty, 0, h - 1), np.clip(tx, 0, w - 1)].astype(np.float64)
            score = np.einsum("hwd,hwd->hw", fa64, gathered)
            out[..., n] = np.where(ok, score, OUT_OF_RANGE)
            n += 1
    return out


correlate = pick(_correlate_numba, _correlate_numpy)
