"""SSIM and silhouette IoU, plus the CSV report that collects them."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError

LUMA = np.array([0.299, 0.587, 0.114])


def to_luminance(image) -> np.ndarray:
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3 and arr.shape[2] == 1:
        return arr[..., 0]
    if arr.ndim == 3 and arr.shape[2] == 3:
        return arr @ LUMA
    raise DimensionError(f"expected a grey or RGB image, got shape {arr.shape}")


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r * r) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    # separable 'valid' correlation: rows then columns
    rows = sliding_window_view(img, len(g), axis=1) @ g
    return sliding_window_view(rows, len(g), axis=0) @ g


def ssim(a, b, window: int = 11, sigma: float = 1.5, data_range: float = 1.0) -> float:
    """Mean SSIM over all fully-covered ``window x window`` Gaussian windows.

    RGB inputs are reduced to luminance first.  Constants follow the usual
    ``K1 = 0.01``, ``K2 = 0.03``.
    """
    x = to_luminance(a)
    y = to_luminance(b)
    if x.shape != y.shape:
        raise DimensionError(f"shape mismatch: {x.shape} vs {y.shape}")
    if x.shape[0] < window or x.shape[1] < window:
        raise DimensionError(f"image {x.shape} smaller than the {window}x{window} window")
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    g = gaussian_window(window, sigma)
    mx = _filter_valid(x, g)
    my = _filter_valid(y, g)
    sxx = _filter_valid(x * x, g) - mx * mx
    syy = _filter_valid(y * y, g) - my * my
    sxy = _filter_valid(x * y, g) - mx * my
    num = (2.0 * mx * my + c1) * (2.0 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float((num / den).mean())


def iou(pred, gt, threshold: float = 0.5) -> float:
    """Intersection over union of the two masks binarised at ``threshold``.

    Two empty masks score 1.0.
    """
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(gt, dtype=np.float64)
    if p.shape != t.shape:
        raise DimensionError(f"shape mismatch: {p.shape} vs {t.shape}")
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    pb = p >= threshold
    tb = t >= threshold
    union = np.count_nonzero(pb | tb)
    if union == 0:
        return 1.0
    return np.count_nonzero(pb & tb) / union


def label_mask(labels, label_set) -> np.ndarray:
    return np.isin(np.asarray(labels), list(label_set)).astype(np.float64)


@dataclass
class MetricReport:
    rows: list[dict] = field(default_factory=list)

    def add(self, image_id: str, ssim_value: float, iou_value: float, **extra) -> None:
        if not -1.0 <= ssim_value <= 1.0 + 1e-12:
            raise ValueError(f"ssim {ssim_value} outside [-1, 1]")
        if not 0.0 <= iou_value <= 1.0:
            raise ValueError(f"iou {iou_value} outside [0, 1]")
        self.rows.append({"image_id": image_id, "ssim": ssim_value, "iou": iou_value, **extra})

    @property
    def ssim(self) -> float:
        return float(np.mean([r["ssim"] for r in self.rows])) if self.rows else float("nan")

    @property
    def iou(self) -> float:
        return float(np.mean([r["iou"] for r in self.rows])) if self.rows else float("nan")

    def write_csv(self, path) -> None:
        keys = ["image_id", "ssim", "iou"]
        for row in self.rows:
            keys += [k for k in row if k not in keys]
        with open(Path(path), "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
            writer.writeheader()
            for row in self.rows:
                writer.writerow(
                    {k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in row.items()}
                )
