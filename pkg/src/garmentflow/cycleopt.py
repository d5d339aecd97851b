"""Cycle-consistent refinement of a flow pair and its fusion masks.

Variables: ``flow_fwd`` (query-indexed, samples the source), ``flow_bwd``
(source-indexed, samples the query side) and one grid of mask logits per
direction.  One cycle from ``a`` to ``b`` and back reads

    hat_b = s(l1) * W(I_a, u1) + (1 - s(l1)) * B_b
    out_a = s(l2) * W(hat_b, u2) + (1 - s(l2)) * B_a

and is scored by ``L1 + MSE`` against ``I_a`` plus a TV penalty on both
masks (divided by the pixel count so it sits on the same scale as the
pixel means).  Warp samples that leave the image take the background value.

Pass ``t`` steps along the smoothed gradient of the source cycle (even ``t``)
or the query cycle (odd ``t``); the step is accepted when the symmetric objective
(both cycles summed) does not increase, halving up to ``max_halvings``
times and otherwise leaving the state unchanged.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter
from scipy.special import expit

from .errors import DimensionError, NonFiniteObjective
from .flowfield import FlowField, as_hwc
from .kernels import warp_flow_grad, warp_forward, warp_image_adjoint
from .losses import pixel_loss, pixel_loss_grad, tv_loss, tv_loss_grad

# logits used for a hard 0/1 initial mask; sigmoid(40) rounds to 1.0
LOGIT_LIMIT = 40.0
# gradient magnitude (fraction of the largest) at which a pixel takes half a step
DIRECTION_FLOOR = 1e-3


@dataclass(frozen=True)
class CycleConfig:
    k: int = 20
    step_size: float = 0.2  # largest per-pixel flow update, pixels
    tv_weight: float = 0.1
    armijo_backtrack: bool = True
    logit_step: float = 1.0  # largest per-pixel logit update
    max_halvings: int = 8
    smoothing: float = 4.0  # Gaussian sigma (px) applied to gradients

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")
        if not self.step_size > 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if not self.tv_weight >= 0:
            raise ValueError(f"tv_weight must be non-negative, got {self.tv_weight}")
        if not self.logit_step >= 0:
            raise ValueError(f"logit_step must be non-negative, got {self.logit_step}")
        if self.max_halvings < 0:
            raise ValueError("max_halvings must be >= 0")
        if not self.smoothing >= 0:
            raise ValueError(f"smoothing must be non-negative, got {self.smoothing}")


@dataclass
class CycleState:
    flow_fwd: FlowField
    flow_bwd: FlowField
    mask_logits_fwd: np.ndarray
    mask_logits_bwd: np.ndarray
    background_query: np.ndarray  # (H, W, C)
    background_source: np.ndarray
    k: int = 20
    step_size: float = 0.2
    tv_weight: float = 0.1
    loss_trace: list = field(default_factory=list)
    step_trace: list = field(default_factory=list)
    initial_objective: float = float("nan")
    composite_query: np.ndarray | None = None  # hat O^q of the last state
    reconstruction_source: np.ndarray | None = None  # O^s of the last state

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        shape = self.flow_fwd.shape
        grids = {
            "flow_bwd": self.flow_bwd.shape,
            "mask_logits_fwd": np.shape(self.mask_logits_fwd),
            "mask_logits_bwd": np.shape(self.mask_logits_bwd),
            "background_query": np.shape(self.background_query)[:2],
            "background_source": np.shape(self.background_source)[:2],
        }
        for name, s in grids.items():
            if tuple(s) != shape:
                raise DimensionError(f"{name} {s} does not match flow grid {shape}")

    def fusion_fwd(self) -> np.ndarray:
        return expit(self.mask_logits_fwd)

    def fusion_bwd(self) -> np.ndarray:
        return expit(self.mask_logits_bwd)

    def write_trace(self, path) -> None:
        write_loss_trace(path, self.loss_trace, self.step_trace)


def write_loss_trace(path, objectives, steps=None) -> None:
    """CSV with columns ``iteration, objective, step_size``."""
    steps = [float("nan")] * len(objectives) if steps is None else steps
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "objective", "step_size"])
        for i, (obj, step) in enumerate(zip(objectives, steps)):
            w.writerow([i, repr(float(obj)), repr(float(step))])


def read_loss_trace(path) -> tuple[list[float], list[float]]:
    objectives, steps = [], []
    with open(Path(path), newline="") as fh:
        for row in csv.DictReader(fh):
            objectives.append(float(row["objective"]))
            steps.append(float(row["step_size"]))
    return objectives, steps


def _full(uv):
    return np.ones(uv.shape[:2], dtype=bool)


def _cycle(img_a, bg_b, u1, l1, bg_a, u2, l2, tv_weight):
    """Value and gradients ``(u1, l1, u2, l2)`` of one a -> b -> a cycle."""
    h, w, _ = img_a.shape
    ones = _full(u1)
    m1 = expit(l1)
    m2 = expit(l2)

    w1, in1 = warp_forward(img_a, u1, ones, 0.0)
    w1 = np.where(in1[..., None], w1, bg_b)
    hat_b = m1[..., None] * w1 + (1.0 - m1)[..., None] * bg_b

    w2, in2 = warp_forward(hat_b, u2, ones, 0.0)
    w2 = np.where(in2[..., None], w2, bg_a)
    out = m2[..., None] * w2 + (1.0 - m2)[..., None] * bg_a

    scale = tv_weight / (h * w)
    value = (
        pixel_loss(out, img_a, "L1")
        + pixel_loss(out, img_a, "MSE")
        + scale * (tv_loss(m1) + tv_loss(m2))
    )

    g_out = pixel_loss_grad(out, img_a, "L1") + pixel_loss_grad(out, img_a, "MSE")
    g_m2 = (g_out * (w2 - bg_a)).sum(axis=-1) + scale * tv_loss_grad(m2)
    g_w2 = np.where(in2[..., None], g_out * m2[..., None], 0.0)
    g_u2 = warp_flow_grad(hat_b, u2, ones, g_w2)
    g_hat = warp_image_adjoint(g_w2, u2, ones, h, w)
    g_m1 = (g_hat * (w1 - bg_b)).sum(axis=-1) + scale * tv_loss_grad(m1)
    g_w1 = np.where(in1[..., None], g_hat * m1[..., None], 0.0)
    g_u1 = warp_flow_grad(img_a, u1, ones, g_w1)
    grads = (g_u1, g_m1 * m1 * (1.0 - m1), g_u2, g_m2 * m2 * (1.0 - m2))
    return value, grads, hat_b, out


def _images(source, query):
    img_s, _ = as_hwc(source.image)
    img_q, _ = as_hwc(query.image)
    if img_s.shape != img_q.shape:
        raise DimensionError(f"source {img_s.shape} and query {img_q.shape} differ")
    return img_s, img_q


def _check_state(state: CycleState, img):
    if state.flow_fwd.shape != img.shape[:2]:
        raise DimensionError(
            f"state grid {state.flow_fwd.shape} does not match images {img.shape[:2]}"
        )
    for name in ("background_query", "background_source"):
        if np.shape(getattr(state, name)) != img.shape:
            raise DimensionError(f"{name} {np.shape(getattr(state, name))} vs image {img.shape}")


def _bg(state, name):
    return np.asarray(getattr(state, name), dtype=np.float64).reshape(
        state.flow_fwd.shape + (-1,)
    )


def cycle_objective(state: CycleState, source, query) -> tuple[float, dict]:
    """Source cycle objective and its gradients.

    The gradient dict has keys ``flow_fwd``, ``flow_bwd`` (``(H, W, 2)``)
    and ``mask_logits_fwd``, ``mask_logits_bwd`` (``(H, W)``).
    """
    img_s, _ = _images(source, query)
    _check_state(state, img_s)
    value, g, _, _ = _cycle(
        img_s,
        _bg(state, "background_query"),
        state.flow_fwd.uv,
        np.asarray(state.mask_logits_fwd, dtype=np.float64),
        _bg(state, "background_source"),
        state.flow_bwd.uv,
        np.asarray(state.mask_logits_bwd, dtype=np.float64),
        state.tv_weight,
    )
    return value, {
        "flow_fwd": g[0],
        "mask_logits_fwd": g[1],
        "flow_bwd": g[2],
        "mask_logits_bwd": g[3],
    }


class _Problem:
    """Both cycles over raw arrays, so the line search avoids re-validation."""

    def __init__(self, img_s, img_q, bg_s, bg_q, tv_weight):
        self.img_s, self.img_q = img_s, img_q
        self.bg_s, self.bg_q = bg_s, bg_q
        self.tv = tv_weight

    def source_cycle(self, x):
        uf, lf, ub, lb = x
        v, g, hat, out = _cycle(self.img_s, self.bg_q, uf, lf, self.bg_s, ub, lb, self.tv)
        return v, g, hat, out

    def query_cycle(self, x):
        uf, lf, ub, lb = x
        v, (gub, glb, guf, glf), hat, out = _cycle(
            self.img_q, self.bg_s, ub, lb, self.bg_q, uf, lf, self.tv
        )
        return v, (guf, glf, gub, glb), hat, out

    def symmetric(self, x):
        return self.source_cycle(x)[0] + self.query_cycle(x)[0]


def _direction(grad, cap, sigma=0.0, floor=None):
    """Descent direction from a Gaussian-smoothed gradient, normalised per pixel.

    Each pixel moves against its smoothed gradient by
    ``cap * |g| / (|g| + floor * max|g|)``, i.e. by almost ``cap`` unless its
    gradient is negligible.  Smoothing couples neighbouring pixels the way a
    matching window would.
    """
    floor = DIRECTION_FLOOR if floor is None else floor
    g = grad
    if sigma > 0:
        if g.ndim == 3:
            g = np.stack(
                [gaussian_filter(g[..., c], sigma, mode="nearest") for c in range(g.shape[2])],
                axis=-1,
            )
        else:
            g = gaussian_filter(g, sigma, mode="nearest")
    mag = np.sqrt((g * g).sum(axis=-1)) if g.ndim == 3 else np.abs(g)
    top = float(mag.max()) if mag.size else 0.0
    if top == 0.0 or cap == 0.0:
        return np.zeros_like(g)
    scale = cap / (mag + floor * top)
    if g.ndim == 3:
        scale = scale[..., None]
    return -g * scale


def initial_logits(mask) -> np.ndarray:
    """Logits of a mask in ``[0, 1]``, saturating to +/-``LOGIT_LIMIT`` at 0 and 1."""
    m = np.clip(np.asarray(mask, dtype=np.float64), 0.0, 1.0)
    with np.errstate(divide="ignore"):
        lg = np.log(m) - np.log1p(-m)
    return np.clip(lg, -LOGIT_LIMIT, LOGIT_LIMIT)


def make_state(
    source,
    query,
    init_fwd: FlowField,
    init_bwd: FlowField,
    config: CycleConfig = CycleConfig(),
    mask_fwd=None,
    mask_bwd=None,
    background_query=None,
    background_source=None,
) -> CycleState:
    """Initial state; masks default to the foregrounds, backgrounds to inpainting."""
    from .pipeline import dilated_foreground, inpaint_background

    img_s, img_q = _images(source, query)
    if init_fwd.shape != img_q.shape[:2] or init_bwd.shape != img_s.shape[:2]:
        raise DimensionError("initial flows must match the image grids")
    if background_query is None:
        background_query = inpaint_background(img_q, dilated_foreground(query.foreground))
    if background_source is None:
        background_source = inpaint_background(img_s, dilated_foreground(source.foreground))
    mf = query.foreground if mask_fwd is None else mask_fwd
    mb = source.foreground if mask_bwd is None else mask_bwd
    return CycleState(
        flow_fwd=init_fwd.copy(),
        flow_bwd=init_bwd.copy(),
        mask_logits_fwd=initial_logits(mf),
        mask_logits_bwd=initial_logits(mb),
        background_query=as_hwc(background_query)[0].copy(),
        background_source=as_hwc(background_source)[0].copy(),
        k=config.k,
        step_size=config.step_size,
        tv_weight=config.tv_weight,
    )


def cycle_refine(
    source,
    query,
    init_fwd: FlowField,
    init_bwd: FlowField,
    config: CycleConfig = CycleConfig(),
    mask_fwd=None,
    mask_bwd=None,
    background_query=None,
    background_source=None,
) -> CycleState:
    """Run ``config.k`` alternating passes and return the final state.

    ``loss_trace[t]`` is the symmetric objective after pass ``t``; the
    starting value is kept in ``initial_objective``.
    """
    state = make_state(
        source, query, init_fwd, init_bwd, config, mask_fwd, mask_bwd,
        background_query, background_source,
    )
    img_s, img_q = _images(source, query)
    prob = _Problem(
        img_s, img_q, state.background_source, state.background_query, config.tv_weight
    )
    x = [
        state.flow_fwd.uv.copy(),
        np.asarray(state.mask_logits_fwd, dtype=np.float64).copy(),
        state.flow_bwd.uv.copy(),
        np.asarray(state.mask_logits_bwd, dtype=np.float64).copy(),
    ]
    current = prob.symmetric(x)
    if not math.isfinite(current):
        raise NonFiniteObjective(0, current)
    state.initial_objective = current
    caps = (config.step_size, config.logit_step, config.step_size, config.logit_step)

    for t in range(config.k):
        cycle = prob.source_cycle if t % 2 == 0 else prob.query_cycle
        _, grads, _, _ = cycle(x)
        dirs = [_direction(g, c, config.smoothing) for g, c in zip(grads, caps)]
        accepted = 0.0
        if any(d.any() for d in dirs):
            alpha = 1.0
            tries = config.max_halvings + 1 if config.armijo_backtrack else 1
            for _ in range(tries):
                trial = [xi + alpha * d for xi, d in zip(x, dirs)]
                value = prob.symmetric(trial)
                if not math.isfinite(value):
                    raise NonFiniteObjective(t, value)
                if value <= current or not config.armijo_backtrack:
                    x, current, accepted = trial, value, alpha * config.step_size
                    break
                alpha *= 0.5
        state.loss_trace.append(current)
        state.step_trace.append(accepted)

    state.flow_fwd = FlowField(x[0], init_fwd.valid)
    state.flow_bwd = FlowField(x[2], init_bwd.valid)
    state.mask_logits_fwd = x[1]
    state.mask_logits_bwd = x[3]
    _, _, hat_q, out_s = prob.source_cycle(x)
    state.composite_query = hat_q
    state.reconstruction_source = out_s
    return state
