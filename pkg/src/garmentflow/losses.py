"""Analytic losses over images, masks and discriminator score grids.

Pixel losses average over all entries; the adversarial losses and the
smoothness penalty are plain sums.  Each loss has a ``*_grad`` companion
where the cycle optimiser needs one.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError

BCE_EPS = 1e-7


def _pair(pred, gt):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise DimensionError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    return pred, gt


def pixel_loss(pred, gt, kind: str = "L1") -> float:
    pred, gt = _pair(pred, gt)
    diff = pred - gt
    if kind == "L1":
        return float(np.abs(diff).mean())
    if kind == "MSE":
        return float((diff * diff).mean())
    raise ValueError(f"kind must be 'L1' or 'MSE', got {kind!r}")


def pixel_loss_grad(pred, gt, kind: str = "L1") -> np.ndarray:
    """Gradient w.r.t. ``pred``; the L1 subgradient at zero is taken as 0."""
    pred, gt = _pair(pred, gt)
    diff = pred - gt
    if kind == "L1":
        return np.sign(diff) / diff.size
    if kind == "MSE":
        return 2.0 * diff / diff.size
    raise ValueError(f"kind must be 'L1' or 'MSE', got {kind!r}")


def bce_loss(pred, gt) -> float:
    pred, gt = _pair(pred, gt)
    p = np.clip(pred, BCE_EPS, 1.0 - BCE_EPS)
    return float(-(gt * np.log(p) + (1.0 - gt) * np.log(1.0 - p)).mean())


def tv_loss(mask) -> float:
    """Sum of squared vertical and horizontal forward differences.

    Vertical terms run over rows ``i >= 1``, horizontal terms over columns
    ``j >= 1``.
    """
    m = np.asarray(mask, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise DimensionError(f"mask must be a non-empty 2-D grid, got {m.shape}")
    dv = m[1:, :] - m[:-1, :]
    dh = m[:, 1:] - m[:, :-1]
    return float((dv * dv).sum() + (dh * dh).sum())


def tv_loss_grad(mask) -> np.ndarray:
    m = np.asarray(mask, dtype=np.float64)
    g = np.zeros_like(m)
    dv = m[1:, :] - m[:-1, :]
    dh = m[:, 1:] - m[:, :-1]
    g[1:, :] += 2.0 * dv
    g[:-1, :] -= 2.0 * dv
    g[:, 1:] += 2.0 * dh
    g[:, :-1] -= 2.0 * dh
    return g


def lsgan_generator_loss(fake_scores) -> float:
    s = np.asarray(fake_scores, dtype=np.float64)
    return float((s * s).sum())


def lsgan_discriminator_loss(fake_scores, real_scores) -> float:
    fake = np.asarray(fake_scores, dtype=np.float64)
    real = np.asarray(real_scores, dtype=np.float64)
    return float(((fake + 1.0) ** 2).sum() + ((real - 1.0) ** 2).sum())


def mask_loss(pred, gt) -> float:
    pred, gt = _pair(pred, gt)
    return bce_loss(pred, gt) + tv_loss(pred)


def generator_total_loss(
    pred_mask,
    gt_mask,
    pred_image,
    gt_image,
    fake_scores,
    perceptual: float = 0.0,
    weights: dict | None = None,
) -> float:
    """Weighted sum of mask, L1, perceptual and adversarial generator terms.

    No perceptual network ships with the package: ``perceptual`` is a
    precomputed value and its weight defaults to 0.  All other weights
    default to 1.
    """
    w = {"mask": 1.0, "l1": 1.0, "perc": 0.0, "adv": 1.0}
    if weights:
        unknown = set(weights) - set(w)
        if unknown:
            raise ValueError(f"unknown loss weights: {sorted(unknown)}")
        w.update(weights)
    return (
        w["mask"] * mask_loss(pred_mask, gt_mask)
        + w["l1"] * pixel_loss(pred_image, gt_image, "L1")
        + w["perc"] * perceptual
        + w["adv"] * lsgan_generator_loss(fake_scores)
    )
