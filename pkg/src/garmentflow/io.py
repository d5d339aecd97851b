"""Readers and writers for the on-disk formats.

* ``.flo``: Middlebury layout, little-endian: float32 tag 202021.25, int32
  width, int32 height, then row-major interleaved float32 ``(u, v)``.
  Validity lives in a sidecar 8-bit PGM next to it (``x.flo`` ->
  ``x.valid.pgm``, 255 = valid); without a sidecar every pixel is valid.
* Images: 8-bit PNG (RGB or grey), values mapped to ``[0, 1]``.
* Label and mask grids: 8-bit binary PGM (P5).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import DataError
from .flowfield import FlowField

FLO_TAG = 202021.25


def validity_path(flo_path) -> Path:
    p = Path(flo_path)
    return p.with_name(p.stem + ".valid.pgm")


def write_flo(path, flow: FlowField, write_validity: bool = True) -> None:
    path = Path(path)
    h, w = flow.shape
    with open(path, "wb") as fh:
        fh.write(np.array([FLO_TAG], dtype="<f4").tobytes())
        fh.write(np.array([w, h], dtype="<i4").tobytes())
        fh.write(np.ascontiguousarray(flow.uv, dtype="<f4").tobytes())
    if write_validity:
        write_pgm(validity_path(path), flow.valid.astype(np.uint8) * 255)


def read_flo(path) -> FlowField:
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: file not found")
    raw = path.read_bytes()
    if len(raw) < 12:
        raise DataError(f"{path}: truncated .flo header")
    tag = np.frombuffer(raw[:4], dtype="<f4")[0]
    if tag != np.float32(FLO_TAG):
        raise DataError(f"{path}: bad .flo tag {tag!r}")
    w, h = (int(v) for v in np.frombuffer(raw[4:12], dtype="<i4"))
    if w <= 0 or h <= 0 or len(raw) != 12 + 8 * w * h:
        raise DataError(f"{path}: size {len(raw)} bytes inconsistent with {w}x{h}")
    uv = np.frombuffer(raw[12:], dtype="<f4").reshape(h, w, 2).astype(np.float64)
    vpath = validity_path(path)
    if vpath.exists():
        valid = read_pgm(vpath) > 0
        if valid.shape != (h, w):
            raise DataError(f"{vpath}: shape {valid.shape} does not match flow {h}x{w}")
    else:
        valid = np.ones((h, w), dtype=bool)
    if not np.isfinite(uv).all():
        raise DataError(f"{path}: non-finite flow values")
    return FlowField(uv, valid)


def to_uint8(image) -> np.ndarray:
    return np.round(np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0) * 255.0).astype(
        np.uint8
    )


def write_png(path, image) -> None:
    PILImage.fromarray(to_uint8(image)).save(Path(path), format="PNG")


def read_png(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: file not found")
    try:
        with PILImage.open(path) as im:
            mode = "L" if im.mode in ("L", "I", "1") else "RGB"
            arr = np.asarray(im.convert(mode), dtype=np.float64)
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from None
    return arr / 255.0


def write_pgm(path, grid) -> None:
    arr = np.asarray(grid)
    if arr.min(initial=0) < 0 or arr.max(initial=0) > 255:
        raise ValueError("PGM values must fit in 8 bits")
    PILImage.fromarray(arr.astype(np.uint8)).save(Path(path), format="PPM")


def read_pgm(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: file not found")
    try:
        with PILImage.open(path) as im:
            return np.asarray(im.convert("L"), dtype=np.int64)
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from None


def write_json(path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def read_json(path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: file not found")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: {exc}") from None
