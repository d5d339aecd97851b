"""Coarse-to-fine pixel flow from patch features and a local correlation volume.

Per pyramid level (coarsest first) the estimator

1. builds zero-mean, unit-norm patch features of the target and the source,
   each image augmented with its part map as a down-weighted extra block;
2. correlates every target pixel against source pixels in a
   ``(2D+1)^2`` window centred on the rounded upsampled estimate;
3. takes the best integer offset (first in row-major order on ties) and
   refines each axis with a parabola through the neighbouring scores;
4. optionally median-filters the field and upsamples it to the next level.

Targets index the flow: ``target(p) ~ source(p + flow(p))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import median_filter

from .errors import DimensionError
from .flowfield import FlowField, as_hwc, upsample_flow
from .kernels import correlate

# intensities are snapped to this grid after per-channel min-max scaling so
# that affine intensity changes yield bit-identical features
INTENSITY_QUANTUM = 2.0**-16
# RMS deviation (in min-max scaled units) below which a patch counts as flat
FLAT_RMS = 1e-4


@dataclass(frozen=True)
class FlowParams:
    levels: int = 4
    max_disp: int | tuple[int, ...] = 4
    patch_radius: int = 3
    median_filter: bool = True
    part_weight: float = 0.25

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError(f"levels must be >= 1, got {self.levels}")
        if self.patch_radius < 1:
            raise ValueError(f"patch_radius must be >= 1, got {self.patch_radius}")
        disps = self.max_disp if isinstance(self.max_disp, tuple) else (self.max_disp,)
        if any(int(d) < 1 for d in disps):
            raise ValueError(f"max_disp must be >= 1, got {self.max_disp}")
        if isinstance(self.max_disp, tuple) and len(self.max_disp) != self.levels:
            raise ValueError("per-level max_disp needs one entry per level")
        if self.part_weight < 0:
            raise ValueError("part_weight must be non-negative")

    def disp_at(self, level: int) -> int:
        if isinstance(self.max_disp, tuple):
            return int(self.max_disp[level])
        return int(self.max_disp)

    def search_range(self) -> int:
        """Largest displacement (level-0 pixels) the pyramid can reach."""
        return sum(self.disp_at(k) * 2**k for k in range(self.levels))


@dataclass
class CostVolume:
    scores: np.ndarray  # (H, W, (2D+1)^2), offsets (dy, dx) row-major
    max_disp: int

    def offsets(self) -> np.ndarray:
        """``(n, 2)`` array of ``(dx, dy)`` per volume channel."""
        r = np.arange(-self.max_disp, self.max_disp + 1)
        dy, dx = np.meshgrid(r, r, indexing="ij")
        return np.stack([dx.ravel(), dy.ravel()], axis=1)

    def argmax(self) -> np.ndarray:
        """Best ``(dx, dy)`` per pixel; ties go to the first offset row-major."""
        return self.offsets()[np.argmax(self.scores, axis=-1)]


def build_pyramid(image, levels: int) -> list[np.ndarray]:
    """``levels`` images, each a 2x2 box average of the previous one.

    Odd trailing rows/columns are dropped before averaging.
    """
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    img = np.asarray(image, dtype=np.float64)
    need = 2 ** (levels - 1)
    if img.shape[0] < need or img.shape[1] < need:
        raise DimensionError(
            f"image {img.shape[:2]} too small for {levels} levels (needs {need} px)"
        )
    pyr = [img]
    for _ in range(levels - 1):
        cur = pyr[-1]
        h2, w2 = cur.shape[0] // 2, cur.shape[1] // 2
        c = cur[: 2 * h2, : 2 * w2]
        pyr.append(0.25 * (c[0::2, 0::2] + c[0::2, 1::2] + c[1::2, 0::2] + c[1::2, 1::2]))
    return pyr


def normalize_intensity(image) -> np.ndarray:
    """Per-channel min-max scaling to ``[0, 1]``, snapped to ``INTENSITY_QUANTUM``."""
    img, _ = as_hwc(image)
    lo = img.min(axis=(0, 1), keepdims=True)
    span = img.max(axis=(0, 1), keepdims=True) - lo
    safe = np.where(span > 0, span, 1.0)
    scaled = np.where(span > 0, (img - lo) / safe, 0.0)
    return np.round(scaled / INTENSITY_QUANTUM) * INTENSITY_QUANTUM


def _patch_vectors(image, radius: int) -> np.ndarray:
    img = normalize_intensity(image)
    h, w, c = img.shape
    k = 2 * radius + 1
    pad = np.pad(img, ((radius, radius), (radius, radius), (0, 0)), mode="edge")
    win = sliding_window_view(pad, (k, k), axis=(0, 1))  # (H, W, C, k, k)
    vec = win.reshape(h, w, c * k * k)
    vec = vec - vec.mean(axis=-1, keepdims=True)
    norm = np.sqrt((vec * vec).sum(axis=-1, keepdims=True))
    flat = norm <= FLAT_RMS * np.sqrt(vec.shape[-1])
    return np.where(flat, 0.0, vec / np.where(flat, 1.0, norm))


def patch_features(image, radius: int) -> np.ndarray:
    """Zero-mean, unit-norm ``(2r+1)^2 x C`` patch vectors (edge-replicated).

    Flat patches map to the zero vector.  Returned as ``(H, W, d)`` float32.
    """
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    return _patch_vectors(image, radius).astype(np.float32)


def structure_features(image, part_map, radius: int, part_weight: float) -> np.ndarray:
    """Image patch features with the part-map patch appended at ``part_weight``.

    The two blocks are normalised separately before weighting, so the result
    is still invariant to affine intensity changes of ``image``.
    """
    f_img = _patch_vectors(image, radius)
    if part_weight == 0 or part_map is None:
        return f_img.astype(np.float32)
    f_part = part_weight * _patch_vectors(np.asarray(part_map, dtype=np.float64), radius)
    feat = np.concatenate([f_img, f_part], axis=-1)
    norm = np.sqrt((feat * feat).sum(axis=-1, keepdims=True))
    return np.where(norm > 0, feat / np.where(norm > 0, norm, 1.0), 0.0).astype(np.float32)


def correlation_volume(feat_a, feat_b, max_disp: int, base=None) -> CostVolume:
    """Cosine scores ``<a(p), b(p + base(p) + d)>`` for ``d`` in ``[-D, D]^2``.

    ``base`` is an optional ``(H, W, 2)`` integer ``(dx, dy)`` offset.
    """
    fa = np.ascontiguousarray(feat_a, dtype=np.float32)
    fb = np.ascontiguousarray(feat_b, dtype=np.float32)
    if fa.shape != fb.shape:
        raise DimensionError(f"feature maps differ: {fa.shape} vs {fb.shape}")
    if max_disp < 1:
        raise ValueError(f"max_disp must be >= 1, got {max_disp}")
    h, w, _ = fa.shape
    if base is None:
        bx = np.zeros((h, w), dtype=np.int64)
        by = np.zeros((h, w), dtype=np.int64)
    else:
        base = np.asarray(base)
        bx = np.ascontiguousarray(base[..., 0], dtype=np.int64)
        by = np.ascontiguousarray(base[..., 1], dtype=np.int64)
    return CostVolume(correlate(fa, fb, bx, by, int(max_disp)), int(max_disp))


def subpixel_refine(c_minus: float, c_0: float, c_plus: float) -> float:
    """Vertex offset of the parabola through three scores peaking at the centre."""
    if c_0 < max(c_minus, c_plus):
        raise ValueError(
            f"centre score {c_0} is not a peak (neighbours {c_minus}, {c_plus})"
        )
    return float(_parabola_offset(np.float64(c_minus), np.float64(c_0), np.float64(c_plus)))


def _parabola_offset(cm, c0, cp):
    den = 2.0 * (cm - 2.0 * c0 + cp)
    ok = np.abs(den) >= 1e-12
    delta = np.where(ok, (cm - cp) / np.where(ok, den, 1.0), 0.0)
    return np.clip(delta, -0.5, 0.5)


def _refine_level(fa, fb, init_uv, max_disp):
    h, w, _ = fa.shape
    base = np.rint(init_uv).astype(np.int64)
    vol = correlation_volume(fa, fb, max_disp, base)
    side = 2 * max_disp + 1
    best = np.argmax(vol.scores, axis=-1)
    iy, ix = np.divmod(best, side)
    scores = vol.scores.reshape(h, w, side, side)
    rows, cols = np.mgrid[0:h, 0:w]
    c0 = scores[rows, cols, iy, ix]
    # absolute source coordinates of the winner, for range checks on neighbours
    sx = cols + base[..., 0] + ix - max_disp
    sy = rows + base[..., 1] + iy - max_disp

    def axis_offset(idx, coord, n_src, along_x):
        has = (idx > 0) & (idx < side - 1) & (coord > 0) & (coord < n_src - 1)
        lo = np.clip(idx - 1, 0, side - 1)
        hi = np.clip(idx + 1, 0, side - 1)
        if along_x:
            cm, cp = scores[rows, cols, iy, lo], scores[rows, cols, iy, hi]
        else:
            cm, cp = scores[rows, cols, lo, ix], scores[rows, cols, hi, ix]
        return np.where(has, _parabola_offset(cm, c0, cp), 0.0)

    sub_x = axis_offset(ix, sx, w, True)
    sub_y = axis_offset(iy, sy, h, False)
    uv = np.empty((h, w, 2))
    uv[..., 0] = base[..., 0] + (ix - max_disp) + sub_x
    uv[..., 1] = base[..., 1] + (iy - max_disp) + sub_y
    textured = np.any(fa != 0, axis=-1)
    return np.where(textured[..., None], uv, init_uv)


def estimate_flow(source, target, params: FlowParams = FlowParams(), levels_out=None) -> FlowField:
    """Backward flow on the target grid, valid on the target foreground.

    ``source`` and ``target`` need ``image``, ``part_map`` and ``foreground``
    attributes (a :class:`~garmentflow.pipeline.PersonBundle` fits).  Pass a
    list as ``levels_out`` to collect the per-level estimates, coarsest first.
    """
    src = np.asarray(source.image, dtype=np.float64)
    tgt = np.asarray(target.image, dtype=np.float64)
    if src.shape != tgt.shape:
        raise DimensionError(f"source {src.shape} and target {tgt.shape} differ")
    pyr_s = build_pyramid(src, params.levels)
    pyr_t = build_pyramid(tgt, params.levels)
    parts_s = build_pyramid(np.asarray(source.part_map, dtype=np.float64), params.levels)
    parts_t = build_pyramid(np.asarray(target.part_map, dtype=np.float64), params.levels)

    uv = np.zeros(pyr_t[-1].shape[:2] + (2,))
    for level in range(params.levels - 1, -1, -1):
        shape = pyr_t[level].shape[:2]
        if uv.shape[:2] != shape:
            uv = upsample_flow(FlowField(uv, np.ones(uv.shape[:2], bool)), 2, shape).uv
        fa = structure_features(
            pyr_t[level], parts_t[level], params.patch_radius, params.part_weight
        )
        fb = structure_features(
            pyr_s[level], parts_s[level], params.patch_radius, params.part_weight
        )
        uv = _refine_level(fa, fb, uv, params.disp_at(level))
        if params.median_filter:
            uv = np.stack(
                [median_filter(uv[..., c], size=3, mode="nearest") for c in range(2)],
                axis=-1,
            )
        if levels_out is not None:
            levels_out.append(FlowField(uv.copy(), np.ones(shape, bool)))

    fg = np.asarray(target.foreground) > 0.5
    return FlowField(uv, fg)
