from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from garmentflow.errors import DimensionError
from garmentflow.losses import (
    bce_loss,
    generator_total_loss,
    lsgan_discriminator_loss,
    lsgan_generator_loss,
    mask_loss,
    pixel_loss,
    pixel_loss_grad,
    tv_loss,
    tv_loss_grad,
)


def tv_oracle(m):
    # literal double loop over i >= 1, j >= 1 style index ranges
    total = 0.0
    h, w = len(m), len(m[0])
    for i in range(1, h):
        for j in range(w):
            total += (m[i][j] - m[i - 1][j]) ** 2
    for i in range(h):
        for j in range(1, w):
            total += (m[i][j] - m[i][j - 1]) ** 2
    return total


def test_pixel_loss_examples():
    a = np.random.default_rng(0).random((3, 4))
    assert pixel_loss(a, a, "L1") == 0 and pixel_loss(a, a, "MSE") == 0
    assert pixel_loss(np.zeros((2, 2)), np.full((2, 2), 0.5), "L1") == 0.5
    assert pixel_loss(np.zeros((2, 2)), np.full((2, 2), 0.5), "MSE") == 0.25
    assert pixel_loss([0.2], [0.6], "L1") == pytest.approx(0.4, abs=1e-15)
    with pytest.raises(DimensionError):
        pixel_loss(np.zeros(2), np.zeros(3))
    with pytest.raises(ValueError):
        pixel_loss(a, a, "L2")


def test_pixel_loss_grads_match_finite_differences(rng):
    pred, gt = rng.random(6), rng.random(6)
    for kind in ("L1", "MSE"):
        g = pixel_loss_grad(pred, gt, kind)
        for i in range(6):
            e = np.zeros(6)
            e[i] = 1e-6
            fd = (pixel_loss(pred + e, gt, kind) - pixel_loss(pred - e, gt, kind)) / 2e-6
            assert g[i] == pytest.approx(fd, rel=1e-5)


def test_bce_examples():
    for v in (0.0, 1.0):
        m = np.full((3, 3), v)
        assert bce_loss(m, m) <= 1.2e-6
    assert bce_loss(np.full(4, 0.5), np.ones(4)) == pytest.approx(math.log(2), abs=1e-4)
    assert bce_loss(np.full(4, 0.5), np.zeros(4)) == pytest.approx(math.log(2), abs=1e-12)


def test_tv_examples():
    assert tv_loss(np.full((4, 5), 0.7)) == 0
    assert tv_loss(np.array([[0.0, 1.0], [0.0, 1.0]])) == 2.0
    row = np.array([[0.0, 1.0, 3.0]])
    assert tv_loss(row) == 1.0 + 4.0


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=st.floats(-2, 2)))
def test_tv_matches_loop_oracle_and_shift_invariance(m):
    assert tv_loss(m) == pytest.approx(tv_oracle(m.tolist()), abs=1e-12)
    assert tv_loss(m + 0.375) == pytest.approx(tv_loss(m), abs=1e-9)


def test_tv_grad_finite_differences(rng):
    m = rng.random((4, 5))
    g = tv_loss_grad(m)
    for idx in np.ndindex(m.shape):
        e = np.zeros_like(m)
        e[idx] = 1e-6
        assert g[idx] == pytest.approx((tv_loss(m + e) - tv_loss(m - e)) / 2e-6, abs=1e-6)


def test_lsgan_examples():
    assert lsgan_generator_loss(np.zeros((3, 3))) == 0
    assert lsgan_generator_loss([1.0, -1.0]) == 2.0
    assert lsgan_generator_loss([0.5]) == 0.25
    assert lsgan_discriminator_loss(np.full((4, 4), -1.0), np.ones((4, 4))) == 0.0
    assert lsgan_discriminator_loss([0.0], [0.0]) == 2.0
    assert lsgan_discriminator_loss([1.0], [-1.0]) == 8.0


def test_mask_loss_examples():
    assert mask_loss(np.ones((3, 3)), np.ones((3, 3))) == pytest.approx(0, abs=1e-6)
    m = np.array([[0.0, 1.0], [0.0, 1.0]])
    assert mask_loss(m, m) == pytest.approx(2.0, abs=1e-6)
    assert mask_loss(np.full((2, 2), 0.5), np.ones((2, 2))) == pytest.approx(math.log(2), abs=1e-4)


@settings(max_examples=30, deadline=None)
@given(
    arrays(np.float64, (3, 4), elements=st.floats(0, 1)),
    arrays(np.float64, (3, 4), elements=st.floats(0, 1)),
)
def test_losses_non_negative(a, b):
    assert pixel_loss(a, b, "L1") >= 0
    assert pixel_loss(a, b, "MSE") >= 0
    assert bce_loss(a, b) >= 0
    assert tv_loss(a) >= 0


def test_generator_total_loss_weights():
    m = np.array([[0.0, 1.0], [0.0, 1.0]])
    img = np.zeros((2, 2))
    total = generator_total_loss(m, m, img, img + 0.5, [1.0, -1.0])
    assert total == pytest.approx(mask_loss(m, m) + 0.5 + 2.0)
    assert generator_total_loss(m, m, img, img, [0.0], perceptual=9.0) == pytest.approx(mask_loss(m, m))
    with pytest.raises(ValueError):
        generator_total_loss(m, m, img, img, [0.0], weights={"style": 1.0})
