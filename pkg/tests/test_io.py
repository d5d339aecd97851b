from __future__ import annotations

import struct

import numpy as np
import pytest

from garmentflow import io
from garmentflow.errors import DataError
from garmentflow.flowfield import FlowField


def test_flo_layout_is_middlebury(tmp_path):
    uv = np.arange(12, dtype=float).reshape(2, 3, 2) * 0.5
    io.write_flo(tmp_path / "f.flo", FlowField(uv, np.ones((2, 3), bool)))
    raw = (tmp_path / "f.flo").read_bytes()
    tag, w, h = struct.unpack("<fii", raw[:12])
    assert (tag, w, h) == (202021.25, 3, 2)
    assert raw[:4] == b"PIEH"
    vals = struct.unpack("<12f", raw[12:])
    assert vals == tuple(uv.ravel())


def test_flo_roundtrip_with_validity(tmp_path, rng):
    uv = rng.normal(size=(5, 4, 2)).astype(np.float32).astype(float)
    valid = rng.random((5, 4)) > 0.4
    f = FlowField(uv, valid)
    io.write_flo(tmp_path / "x.flo", f)
    assert io.validity_path(tmp_path / "x.flo").name == "x.valid.pgm"
    back = io.read_flo(tmp_path / "x.flo")
    np.testing.assert_array_equal(back.uv, f.uv)
    np.testing.assert_array_equal(back.valid, valid)


def test_flo_without_sidecar_is_all_valid(tmp_path):
    io.write_flo(tmp_path / "x.flo", FlowField.constant(2, 2, 1, 1), write_validity=False)
    assert io.read_flo(tmp_path / "x.flo").valid.all()


def test_flo_errors(tmp_path):
    with pytest.raises(DataError, match="not found"):
        io.read_flo(tmp_path / "missing.flo")
    (tmp_path / "bad.flo").write_bytes(struct.pack("<fii", 1.0, 1, 1) + b"\0" * 8)
    with pytest.raises(DataError, match="tag"):
        io.read_flo(tmp_path / "bad.flo")
    (tmp_path / "short.flo").write_bytes(struct.pack("<fii", 202021.25, 4, 4))
    with pytest.raises(DataError, match="inconsistent"):
        io.read_flo(tmp_path / "short.flo")


def test_png_and_pgm_roundtrip(tmp_path, rng):
    img = np.round(rng.random((4, 5, 3)) * 255) / 255
    io.write_png(tmp_path / "a.png", img)
    np.testing.assert_array_equal(io.read_png(tmp_path / "a.png"), img)
    labels = rng.integers(0, 8, (6, 3))
    io.write_pgm(tmp_path / "l.pgm", labels)
    assert (tmp_path / "l.pgm").read_bytes()[:2] == b"P5"
    np.testing.assert_array_equal(io.read_pgm(tmp_path / "l.pgm"), labels)
