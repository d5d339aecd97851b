"""Backward bilinear sampling and its two adjoints.

Output pixel ``(x, y)`` reads the source image at ``(x + u, y + v)``.  A
sample is in range when ``0 <= x + u <= Ws - 1`` and ``0 <= y + v <= Hs - 1``;
the lower-left cell is clamped to ``n - 2`` so the last row/column still
interpolates (and differentiates) against its neighbour.
"""

from __future__ import annotations

import math

import numpy as np

from .._accel import njit, pick


@njit
def _cell(s, n):
    if n == 1:
        return 0, 0, 0.0
    i0 = int(math.floor(s))
    if i0 > n - 2:
        i0 = n - 2
    return i0, i0 + 1, s - i0


@njit
def _warp_forward_numba(image, uv, valid, fill):
    hs, ws, nc = image.shape
    h, w = valid.shape
    out = np.empty((h, w, nc), dtype=np.float64)
    inb = np.zeros((h, w), dtype=np.bool_)
    for y in range(h):
        for x in range(w):
            sx = x + uv[y, x, 0]
            sy = y + uv[y, x, 1]
            if not valid[y, x] or sx < 0.0 or sy < 0.0 or sx > ws - 1 or sy > hs - 1:
                for c in range(nc):
                    out[y, x, c] = fill
                continue
            inb[y, x] = True
            x0, x1, fx = _cell(sx, ws)
            y0, y1, fy = _cell(sy, hs)
            w00 = (1.0 - fx) * (1.0 - fy)
            w01 = fx * (1.0 - fy)
            w10 = (1.0 - fx) * fy
            w11 = fx * fy
            for c in range(nc):
                a = image[y0, x0, c]
                b = image[y0, x1, c]
                d = image[y1, x0, c]
                e = image[y1, x1, c]
                val = w00 * a + w01 * b + w10 * d + w11 * e
                lo = min(min(a, b), min(d, e))
                hi = max(max(a, b), max(d, e))
                out[y, x, c] = min(max(val, lo), hi)
    return out, inb


@njit
def _warp_flow_grad_numba(image, uv, valid, upstream):
    hs, ws, nc = image.shape
    h, w = valid.shape
    grad = np.zeros((h, w, 2), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            sx = x + uv[y, x, 0]
            sy = y + uv[y, x, 1]
            if not valid[y, x] or sx < 0.0 or sy < 0.0 or sx > ws - 1 or sy > hs - 1:
                continue
            x0, x1, fx = _cell(sx, ws)
            y0, y1, fy = _cell(sy, hs)
            gx = 0.0
            gy = 0.0
            for c in range(nc):
                a = image[y0, x0, c]
                b = image[y0, x1, c]
                d = image[y1, x0, c]
                e = image[y1, x1, c]
                g = upstream[y, x, c]
                if ws > 1:
                    gx += g * ((1.0 - fy) * (b - a) + fy * (e - d))
                if hs > 1:
                    gy += g * ((1.0 - fx) * (d - a) + fx * (e - b))
            grad[y, x, 0] = gx
            grad[y, x, 1] = gy
    return grad


@njit
def _warp_image_adjoint_numba(upstream, uv, valid, hs, ws):
    h, w, nc = upstream.shape
    grad = np.zeros((hs, ws, nc), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            sx = x + uv[y, x, 0]
            sy = y + uv[y, x, 1]
            if not valid[y, x] or sx < 0.0 or sy < 0.0 or sx > ws - 1 or sy > hs - 1:
                continue
            x0, x1, fx = _cell(sx, ws)
            y0, y1, fy = _cell(sy, hs)
            w00 = (1.0 - fx) * (1.0 - fy)
            w01 = fx * (1.0 - fy)
            w10 = (1.0 - fx) * fy
            w11 = fx * fy
            for c in range(nc):
                g = upstream[y, x, c]
                grad[y0, x0, c] += w00 * g
                grad[y0, x1, c] += w01 * g
                grad[y1, x0, c] += w10 * g
                grad[y1, x1, c] += w11 * g
    return grad


def _cells_numpy(s, n):
    if n == 1:
        zero = np.zeros(s.shape, dtype=np.intp)
        return zero, zero, np.zeros(s.shape)
    i0 = np.minimum(np.floor(s).astype(np.intp), n - 2)
    return i0, i0 + 1, s - i0


def _sample_setup(uv, valid, hs, ws):
    h, w = valid.shape
    ys, xs = np.mgrid[0:h, 0:w]
    sx = xs + uv[..., 0]
    sy = ys + uv[..., 1]
    inb = valid & (sx >= 0.0) & (sy >= 0.0) & (sx <= ws - 1) & (sy <= hs - 1)
    sx = np.where(inb, sx, 0.0)
    sy = np.where(inb, sy, 0.0)
    x0, x1, fx = _cells_numpy(sx, ws)
    y0, y1, fy = _cells_numpy(sy, hs)
    return inb, x0, x1, fx, y0, y1, fy


def _warp_forward_numpy(image, uv, valid, fill):
    hs, ws, _ = image.shape
    inb, x0, x1, fx, y0, y1, fy = _sample_setup(uv, valid, hs, ws)
    a = image[y0, x0]
    b = image[y0, x1]
    d = image[y1, x0]
    e = image[y1, x1]
    fx = fx[..., None]
    fy = fy[..., None]
    val = (
        (1.0 - fx) * (1.0 - fy) * a
        + fx * (1.0 - fy) * b
        + (1.0 - fx) * fy * d
        + fx * fy * e
    )
    lo = np.minimum(np.minimum(a, b), np.minimum(d, e))
    hi = np.maximum(np.maximum(a, b), np.maximum(d, e))
    out = np.minimum(np.maximum(val, lo), hi)
    out[~inb] = fill
    return out, inb


def _warp_flow_grad_numpy(image, uv, valid, upstream):
    hs, ws, _ = image.shape
    inb, x0, x1, fx, y0, y1, fy = _sample_setup(uv, valid, hs, ws)
    a = image[y0, x0]
    b = image[y0, x1]
    d = image[y1, x0]
    e = image[y1, x1]
    fx = fx[..., None]
    fy = fy[..., None]
    grad = np.zeros(valid.shape + (2,))
    if ws > 1:
        grad[..., 0] = (upstream * ((1.0 - fy) * (b - a) + fy * (e - d))).sum(axis=-1)
    if hs > 1:
        grad[..., 1] = (upstream * ((1.0 - fx) * (d - a) + fx * (e - b))).sum(axis=-1)
    grad[~inb] = 0.0
    return grad


def _warp_image_adjoint_numpy(upstream, uv, valid, hs, ws):
    nc = upstream.shape[2]
    inb, x0, x1, fx, y0, y1, fy = _sample_setup(uv, valid, hs, ws)
    grad = np.zeros((hs, ws, nc))
    g = upstream[inb]
    fx = fx[inb][:, None]
    fy = fy[inb][:, None]
    x0, x1, y0, y1 = x0[inb], x1[inb], y0[inb], y1[inb]
    np.add.at(grad, (y0, x0), (1.0 - fx) * (1.0 - fy) * g)
    np.add.at(grad, (y0, x1), fx * (1.0 - fy) * g)
    np.add.at(grad, (y1, x0), (1.0 - fx) * fy * g)
    np.add.at(grad, (y1, x1), fx * fy * g)
    return grad


warp_forward = pick(_warp_forward_numba, _warp_forward_numpy)
warp_flow_grad = pick(_warp_flow_grad_numba, _warp_flow_grad_numpy)
warp_image_adjoint = pick(_warp_image_adjoint_numba, _warp_image_adjoint_numpy)
