from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from garmentflow.errors import DimensionError
from garmentflow.flowfield import (
    FlowField,
    blend_wflow,
    compose_flows,
    endpoint_error,
    sample_validity,
    upsample_flow,
    warp_bilinear,
    warp_gradient,
    warp_image_gradient,
)

from conftest import backward_gt


def bilinear_oracle(img, sx, sy, fill):
    # scalar reference sampler with the documented edge rule
    h, w = img.shape
    if sx < 0 or sy < 0 or sx > w - 1 or sy > h - 1:
        return fill
    x0 = min(int(np.floor(sx)), max(w - 2, 0))
    y0 = min(int(np.floor(sy)), max(h - 2, 0))
    x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
    fx, fy = sx - x0, sy - y0
    return (
        img[y0, x0] * (1 - fx) * (1 - fy)
        + img[y0, x1] * fx * (1 - fy)
        + img[y1, x0] * (1 - fx) * fy
        + img[y1, x1] * fx * fy
    )


def test_flowfield_invariants():
    uv = np.ones((3, 3, 2))
    valid = np.eye(3, dtype=bool)
    f = FlowField(uv, valid)
    assert (f.uv[~valid] == 0).all()
    with pytest.raises(ValueError):
        FlowField(np.full((2, 2, 2), np.nan), np.ones((2, 2), bool))
    with pytest.raises(DimensionError):
        FlowField(np.zeros((2, 2, 2)), np.ones((3, 2), bool))


def test_blend_checkerboard_example():
    fv = FlowField.constant(2, 2, 2.0, 0.0)
    fp = FlowField.constant(2, 2, 0.0, 3.0)
    out = blend_wflow(fv, np.array([[1, 0], [0, 1]]), fp)
    expect = np.array([[[2, 0], [0, 3]], [[0, 3], [2, 0]]], float)
    np.testing.assert_array_equal(out.uv, expect)


def test_blend_extremes_and_idempotence(rng):
    fv = FlowField(rng.normal(size=(6, 5, 2)), rng.random((6, 5)) > 0.3)
    fp = FlowField(rng.normal(size=(6, 5, 2)), rng.random((6, 5)) > 0.3)
    ones, zeros = np.ones((6, 5)), np.zeros((6, 5))
    np.testing.assert_array_equal(blend_wflow(fv, ones, fp).uv, fv.uv)
    np.testing.assert_array_equal(blend_wflow(fv, ones, fp).valid, fv.valid)
    np.testing.assert_array_equal(blend_wflow(fv, zeros, fp).uv, fp.uv)
    mv = (rng.random((6, 5)) > 0.5).astype(float)
    once = blend_wflow(fv, mv, fp)
    twice = blend_wflow(fv, mv, once)
    np.testing.assert_array_equal(once.uv, twice.uv)
    np.testing.assert_array_equal(once.valid, twice.valid)


def test_blend_rejects_soft_mask_and_shape_mismatch():
    f = FlowField.zeros(2, 2)
    with pytest.raises(ValueError):
        blend_wflow(f, np.full((2, 2), 0.5), f)
    with pytest.raises(DimensionError):
        blend_wflow(f, np.ones((2, 2)), FlowField.zeros(3, 2))


def test_warp_identity_is_bit_exact(rng):
    img = rng.random((7, 9, 3))
    np.testing.assert_array_equal(warp_bilinear(img, FlowField.zeros(7, 9)), img)


def test_warp_ramp_and_hand_example():
    ramp = np.tile(np.arange(8.0), (5, 1))
    out = warp_bilinear(ramp, FlowField.constant(5, 8, 0.5, 0.0), fill=-1)
    np.testing.assert_allclose(out[:, :7], ramp[:, :7] + 0.5)
    assert (out[:, 7] == -1).all()
    img = np.array([[10.0, 20.0]])
    uv = np.zeros((1, 2, 2))
    uv[0, 0, 0] = 0.25
    assert warp_bilinear(img, FlowField(uv, np.ones((1, 2), bool)))[0, 0] == 12.5


def test_warp_matches_scalar_oracle(rng):
    img = rng.random((6, 7))
    uv = rng.uniform(-2, 2, (6, 7, 2))
    valid = rng.random((6, 7)) > 0.2
    flow = FlowField(uv, valid)
    out = warp_bilinear(img, flow, fill=0.25)
    for y in range(6):
        for x in range(7):
            expect = 0.25 if not valid[y, x] else bilinear_oracle(img, x + uv[y, x, 0], y + uv[y, x, 1], 0.25)
            assert out[y, x] == pytest.approx(expect, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    arrays(np.float64, (5, 6), elements=st.floats(-100, 100)),
    arrays(np.float64, (5, 6, 2), elements=st.floats(-8, 8)),
    st.floats(-100, 100),
)
def test_warp_preserves_range(img, uv, fill):
    out = warp_bilinear(img, FlowField(uv, np.ones((5, 6), bool)), fill=fill)
    assert out.min() >= min(img.min(), fill)
    assert out.max() <= max(img.max(), fill)


def test_warp_gradient_constant_and_affine(rng):
    flow = FlowField(rng.uniform(-1.5, 1.5, (8, 8, 2)), np.ones((8, 8), bool))
    assert np.abs(warp_gradient(np.full((8, 8), 0.3), flow, np.ones((8, 8)))).max() == 0
    ys, xs = np.mgrid[0:12, 0:12]
    img = 3.0 * xs + 2.0 * ys
    uv = rng.uniform(-0.9, 0.9, (12, 12, 2))
    flow = FlowField(uv, np.ones((12, 12), bool))
    g = warp_gradient(img, flow, np.ones((12, 12)))
    inside = sample_validity(img.shape, flow)
    np.testing.assert_allclose(g[inside], np.tile([3.0, 2.0], (int(inside.sum()), 1)), atol=1e-12)
    assert (g[~inside] == 0).all()


def finite_difference_flow_grad(img, uv, up, h=1e-3):
    g = np.zeros_like(uv)
    ones = np.ones(uv.shape[:2], bool)
    for idx in np.ndindex(uv.shape):
        p, m = uv.copy(), uv.copy()
        p[idx] += h
        m[idx] -= h
        lp = (up * warp_bilinear(img, FlowField(p, ones))).sum()
        lm = (up * warp_bilinear(img, FlowField(m, ones))).sum()
        g[idx] = (lp - lm) / (2 * h)
    return g


def in_range_flow(rng, n):
    # keep every sample inside the image and away from cell boundaries
    ys, xs = np.mgrid[0:n, 0:n]
    tx = rng.integers(0, n - 1, (n, n)) + rng.uniform(0.05, 0.95, (n, n))
    ty = rng.integers(0, n - 1, (n, n)) + rng.uniform(0.05, 0.95, (n, n))
    return np.stack([tx - xs, ty - ys], -1)


def test_warp_gradient_finite_differences(rng):
    img = rng.random((8, 8, 2))
    uv = in_range_flow(rng, 8)
    up = rng.normal(size=(8, 8, 2))
    g = warp_gradient(img, FlowField(uv, np.ones((8, 8), bool)), up)
    fd = finite_difference_flow_grad(img, uv, up)
    assert np.abs(g - fd).max() / np.abs(fd).max() < 1e-4


def test_warp_image_gradient_is_adjoint(rng):
    img = rng.random((6, 7))
    uv = rng.uniform(-2, 2, (6, 7, 2))
    flow = FlowField(uv, rng.random((6, 7)) > 0.2)
    up = rng.normal(size=(6, 7))
    g = warp_image_gradient(up, flow, img.shape)
    # linear in the image: <up, W img> == <W^T up, img>
    assert (up * warp_bilinear(img, flow)).sum() == pytest.approx((g * img).sum(), rel=1e-12)
    basis = np.zeros_like(img)
    basis[2, 3] = 1.0
    assert g[2, 3] == pytest.approx((up * warp_bilinear(basis, flow)).sum(), abs=1e-12)


def test_upsample_examples():
    f = FlowField(np.random.default_rng(0).normal(size=(3, 4, 2)), np.ones((3, 4), bool))
    np.testing.assert_array_equal(upsample_flow(f, 1).uv, f.uv)
    c = upsample_flow(FlowField.constant(3, 3, 1.0, 2.0), 2)
    assert c.shape == (6, 6)
    np.testing.assert_allclose(c.uv[..., 0], 2.0)
    np.testing.assert_allclose(c.uv[..., 1], 4.0)
    uv = np.zeros((1, 2, 2))
    uv[0, 1, 0] = 2.0
    up = upsample_flow(FlowField(uv, np.ones((1, 2), bool)), 2)
    np.testing.assert_allclose(up.uv[0, :, 0], [0.0, 1.0, 3.0, 4.0])
    with pytest.raises(ValueError):
        upsample_flow(f, 0)


def test_upsample_odd_shape_and_validity():
    valid = np.array([[True, False]])
    up = upsample_flow(FlowField(np.zeros((1, 2, 2)), valid), 2, shape=(3, 5))
    assert up.shape == (3, 5)
    assert up.valid[:, :2].all() and not up.valid[:, 2:].any()


def test_compose_examples(translated_pair):
    outer = FlowField.constant(6, 6, 1.0, 0.0)
    same = compose_flows(outer, FlowField.zeros(6, 6))
    np.testing.assert_array_equal(same.uv[same.valid], outer.uv[same.valid])
    assert same.valid[:, :-1].all()
    out = compose_flows(outer, FlowField.constant(6, 6, 0.0, 1.0))
    np.testing.assert_allclose(out.uv[1:-1, 1:-2], np.tile([1.0, 1.0], (4, 3, 1)))
    assert not out.valid[:, -1].any()
    pair = translated_pair
    comp = compose_flows(pair.gt_flow, backward_gt(pair))
    epe = np.hypot(comp.uv[..., 0], comp.uv[..., 1])[comp.valid]
    assert comp.valid.sum() > 500
    assert epe.max() < 0.1


def test_endpoint_error():
    a = FlowField.constant(2, 2, 3.0, 4.0)
    np.testing.assert_allclose(endpoint_error(a, FlowField.zeros(2, 2)), 5.0)
