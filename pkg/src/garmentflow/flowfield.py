"""Flow-field container and the warping/blending algebra."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .kernels import warp_flow_grad, warp_forward, warp_image_adjoint


@dataclass
class FlowField:
    """Backward displacement field: pixel ``p`` samples the source at ``p + uv[p]``.

    ``uv[..., 0]`` is the x (column) displacement, ``uv[..., 1]`` the y (row)
    displacement.  Invalid pixels always carry ``(0, 0)``.
    """

    uv: np.ndarray  # (H, W, 2) float64
    valid: np.ndarray  # (H, W) bool

    def __post_init__(self):
        self.uv = np.array(self.uv, dtype=np.float64)
        self.valid = np.array(self.valid, dtype=bool)
        if self.uv.ndim != 3 or self.uv.shape[2] != 2:
            raise DimensionError(f"flow must be (H, W, 2), got {self.uv.shape}")
        if self.valid.shape != self.uv.shape[:2]:
            raise DimensionError(
                f"validity {self.valid.shape} does not match flow {self.uv.shape[:2]}"
            )
        if not np.isfinite(self.uv).all():
            raise ValueError("flow contains NaN or Inf")
        self.uv[~self.valid] = 0.0

    @property
    def shape(self) -> tuple[int, int]:
        return self.uv.shape[:2]

    @property
    def height(self) -> int:
        return self.uv.shape[0]

    @property
    def width(self) -> int:
        return self.uv.shape[1]

    @classmethod
    def zeros(cls, height: int, width: int, valid: bool = True) -> "FlowField":
        return cls(np.zeros((height, width, 2)), np.full((height, width), valid))

    @classmethod
    def constant(cls, height: int, width: int, dx: float, dy: float) -> "FlowField":
        uv = np.empty((height, width, 2))
        uv[..., 0] = dx
        uv[..., 1] = dy
        return cls(uv, np.ones((height, width), dtype=bool))

    def copy(self) -> "FlowField":
        return FlowField(self.uv.copy(), self.valid.copy())

    def masked(self, mask) -> "FlowField":
        return FlowField(self.uv, self.valid & np.asarray(mask, dtype=bool))


def as_hwc(image) -> tuple[np.ndarray, bool]:
    """View an image as ``(H, W, C)`` float64; the flag says it was 2-D."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        return np.ascontiguousarray(arr[..., None]), True
    if arr.ndim == 3:
        return np.ascontiguousarray(arr), False
    raise DimensionError(f"image must be 2-D or 3-D, got shape {arr.shape}")


def _check_same(shape_a, shape_b, what: str) -> None:
    if tuple(shape_a) != tuple(shape_b):
        raise DimensionError(f"{what}: {tuple(shape_a)} vs {tuple(shape_b)}")


def blend_wflow(vertex_flow: FlowField, mv, pixel_flow: FlowField) -> FlowField:
    """Per-pixel ``mv * vertex_flow + (1 - mv) * pixel_flow`` for a binary ``mv``.

    Validity follows whichever flow the mask selects.
    """
    mv = np.asarray(mv, dtype=np.float64)
    _check_same(vertex_flow.shape, mv.shape, "vertex flow vs mask")
    _check_same(pixel_flow.shape, mv.shape, "pixel flow vs mask")
    if not np.isin(mv, (0.0, 1.0)).all():
        raise ValueError("vertex-flow mask must be binary")
    m = mv[..., None]
    uv = m * vertex_flow.uv + (1.0 - m) * pixel_flow.uv
    valid = np.where(mv == 1.0, vertex_flow.valid, pixel_flow.valid)
    return FlowField(uv, valid)


def warp_bilinear(image, flow: FlowField, fill: float = 0.0) -> np.ndarray:
    """Sample ``image`` at ``p + flow(p)``; out-of-range or invalid pixels get ``fill``."""
    img, flat = as_hwc(image)
    _check_same(img.shape[:2], flow.shape, "image vs flow")
    out, _ = warp_forward(img, flow.uv, flow.valid, float(fill))
    return out[..., 0] if flat else out


def sample_validity(image_shape, flow: FlowField) -> np.ndarray:
    """Pixels whose warped sample lands inside an ``image_shape`` image."""
    h, w = image_shape[:2]
    ys, xs = np.mgrid[0 : flow.height, 0 : flow.width]
    sx = xs + flow.uv[..., 0]
    sy = ys + flow.uv[..., 1]
    return flow.valid & (sx >= 0) & (sy >= 0) & (sx <= w - 1) & (sy <= h - 1)


def warp_gradient(image, flow: FlowField, upstream) -> np.ndarray:
    """Gradient of ``sum(upstream * warp_bilinear(image, flow))`` w.r.t. the flow.

    Returns an ``(H, W, 2)`` array; zero where the sample is invalid or out of
    range.
    """
    img, _ = as_hwc(image)
    up, _ = as_hwc(upstream)
    _check_same(img.shape[:2], flow.shape, "image vs flow")
    _check_same(up.shape, img.shape[:2] + (img.shape[2],), "upstream vs warped image")
    return warp_flow_grad(img, flow.uv, flow.valid, up)


def warp_image_gradient(upstream, flow: FlowField, image_shape) -> np.ndarray:
    """Gradient of ``sum(upstream * warp_bilinear(image, flow))`` w.r.t. the image."""
    up, flat = as_hwc(upstream)
    _check_same(up.shape[:2], flow.shape, "upstream vs flow")
    hs, ws = image_shape[:2]
    g = warp_image_adjoint(up, flow.uv, flow.valid, int(hs), int(ws))
    return g[..., 0] if flat else g


def upsample_flow(flow: FlowField, factor: int, shape=None) -> FlowField:
    """Bilinear upsampling with displacements scaled by ``factor``.

    Output pixel ``X`` reads the input at ``(X + 0.5) / factor - 0.5`` (pixel
    areas aligned, edges clamped), so a 2-pixel row ``[0, 2]`` upsampled by 2
    becomes ``[0, 1, 3, 4]``.  Validity comes from the input pixel covering
    the output pixel.  ``shape`` overrides the ``factor``-times output size.
    """
    if int(factor) != factor or factor < 1:
        raise ValueError(f"upsampling factor must be an integer >= 1, got {factor}")
    factor = int(factor)
    h, w = flow.shape
    oh, ow = shape if shape is not None else (h * factor, w * factor)
    if factor == 1 and (oh, ow) == (h, w):
        return flow.copy()

    def axis(n_out, n_in):
        s = np.clip((np.arange(n_out) + 0.5) / factor - 0.5, 0.0, n_in - 1)
        i0 = np.minimum(np.floor(s).astype(np.intp), max(n_in - 2, 0))
        i1 = np.minimum(i0 + 1, n_in - 1)
        return i0, i1, s - i0

    y0, y1, fy = axis(oh, h)
    x0, x1, fx = axis(ow, w)
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    uv = flow.uv
    top = (1.0 - fx) * uv[y0][:, x0] + fx * uv[y0][:, x1]
    bot = (1.0 - fx) * uv[y1][:, x0] + fx * uv[y1][:, x1]
    out = ((1.0 - fy) * top + fy * bot) * factor
    ny = np.minimum(np.arange(oh) // factor, h - 1)
    nx = np.minimum(np.arange(ow) // factor, w - 1)
    valid = flow.valid[ny][:, nx]
    return FlowField(out, valid)


def compose_flows(outer: FlowField, inner: FlowField) -> FlowField:
    """``outer(p) + inner(p + outer(p))`` with the inner flow sampled bilinearly.

    Valid where ``outer`` is valid, the lookup is in range and every corner
    contributing to the inner sample is valid.
    """
    _check_same(outer.shape, inner.shape, "outer vs inner flow")
    stack = np.concatenate([inner.uv, inner.valid[..., None].astype(np.float64)], axis=2)
    sampled, inb = warp_forward(stack, outer.uv, outer.valid, 0.0)
    valid = inb & (sampled[..., 2] >= 1.0 - 1e-12)
    return FlowField(outer.uv + sampled[..., :2], valid)


def endpoint_error(estimate: FlowField, reference: FlowField) -> np.ndarray:
    """Per-pixel Euclidean distance between two flows."""
    _check_same(estimate.shape, reference.shape, "estimate vs reference")
    return np.hypot(*(estimate.uv - reference.uv).transpose(2, 0, 1))
