"""Jacobi sweeps of the discrete Laplace equation over a hole mask.

Each hole pixel is replaced by the mean of its in-image 4-neighbours
(summed up, down, left, right); pixels outside the hole never change.
Iteration stops after ``max_sweeps`` or once the largest update is below
``tol``.
"""

from __future__ import annotations

import numpy as np

from .._accel import njit, pick


@njit
def _jacobi_numba(values, hole, max_sweeps, tol):
    h, w, nc = values.shape
    cur = values.copy()
    nxt = values.copy()
    sweeps = 0
    for _ in range(max_sweeps):
        sweeps += 1
        delta = 0.0
        for y in range(h):
            for x in range(w):
                if not hole[y, x]:
                    continue
                for c in range(nc):
                    acc = 0.0
                    cnt = 0
                    if y > 0:
                        acc += cur[y - 1, x, c]
                        cnt += 1
                    if y < h - 1:
                        acc += cur[y + 1, x, c]
                        cnt += 1
                    if x > 0:
                        acc += cur[y, x - 1, c]
                        cnt += 1
                    if x < w - 1:
                        acc += cur[y, x + 1, c]
                        cnt += 1
                    v = acc / cnt
                    d = abs(v - cur[y, x, c])
                    if d > delta:
                        delta = d
                    nxt[y, x, c] = v
        # every hole pixel of the stale buffer is rewritten next sweep
        tmp = cur
        cur = nxt
        nxt = tmp
        if delta < tol:
            break
    return cur, sweeps


def _jacobi_numpy(values, hole, max_sweeps, tol):
    h, w, _ = values.shape
    cur = values.copy()
    ones = np.ones((h, w))
    cnt = np.zeros((h, w))
    cnt[1:, :] += ones[:-1, :]
    cnt[:-1, :] += ones[1:, :]
    cnt[:, 1:] += ones[:, :-1]
    cnt[:, :-1] += ones[:, 1:]
    cnt = cnt[..., None]
    sweeps = 0
    for _ in range(max_sweeps):
        sweeps += 1
        acc = np.zeros_like(cur)
        acc[1:, :] += cur[:-1, :]
        acc[:-1, :] += cur[1:, :]
        acc[:, 1:] += cur[:, :-1]
        acc[:, :-1] += cur[:, 1:]
        new = acc / cnt
        delta = np.abs(new[hole] - cur[hole]).max() if hole.any() else 0.0
        cur[hole] = new[hole]
        if delta < tol:
            break
    return cur, sweeps


jacobi_fill = pick(_jacobi_numba, _jacobi_numpy)
