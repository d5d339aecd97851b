from __future__ import annotations

import math
from types import SimpleNamespace

import numpy as np
import pytest

from garmentflow.errors import DimensionError
from garmentflow.flowfield import endpoint_error
from garmentflow.pixelflow import (
    CostVolume,
    FlowParams,
    build_pyramid,
    correlation_volume,
    estimate_flow,
    patch_features,
    structure_features,
    subpixel_refine,
)


def bundle(image, part_map=None, foreground=None):
    h, w = image.shape[:2]
    return SimpleNamespace(
        image=image,
        part_map=np.zeros((h, w), int) if part_map is None else part_map,
        foreground=np.ones((h, w)) if foreground is None else foreground,
    )


def test_pyramid_examples():
    img = np.random.default_rng(0).random((8, 8))
    assert len(build_pyramid(img, 1)) == 1
    np.testing.assert_array_equal(build_pyramid(img, 1)[0], img)
    pyr = build_pyramid(np.full((4, 4), 0.3), 2)
    assert pyr[1].shape == (2, 2)
    np.testing.assert_allclose(pyr[1], 0.3)
    assert build_pyramid(np.array([[0.0, 2.0], [4.0, 6.0]]), 2)[1][0, 0] == 3.0
    with pytest.raises(DimensionError):
        build_pyramid(np.zeros((4, 4)), 4)


def test_patch_features_contract(rng):
    assert not patch_features(np.full((6, 6), 0.4), 1).any()
    img = rng.random((12, 10, 3))
    f = patch_features(img, 2)
    assert f.dtype == np.float32 and f.shape == (12, 10, 25 * 3)
    norms = np.linalg.norm(f.astype(float), axis=-1)
    assert np.all((np.abs(norms - 1) < 1e-5) | (norms == 0))
    np.testing.assert_array_equal(patch_features(img * 2 + 5, 2), f)
    with pytest.raises(ValueError):
        patch_features(img, 0)


def test_patch_feature_is_normalised_patch(rng):
    img = rng.random((7, 7))
    f = patch_features(img, 1)
    # oracle: interior patch around (3, 3) after min-max scaling
    scaled = (img - img.min()) / (img.max() - img.min())
    v = scaled[2:5, 2:5].ravel()
    v = v - v.mean()
    np.testing.assert_allclose(f[3, 3], v / np.linalg.norm(v), atol=1e-4)


def test_correlation_self_shift_and_orthogonal(rng):
    img = rng.random((20, 20))
    fa = patch_features(img, 2)
    vol = correlation_volume(fa, fa, 2)
    assert (vol.argmax() == 0).all()
    assert np.abs(vol.scores[..., 12] - 1).max() < 1e-5
    assert vol.scores.min() >= -1 - 1e-5 and vol.scores.max() <= 1 + 1e-5
    shifted = np.roll(img, 3, axis=1)  # shifted(x) = img(x - 3)
    fb = patch_features(shifted, 2)
    vol = correlation_volume(fa, fb, 4)
    np.testing.assert_array_equal(vol.argmax()[4:-4, 4:-7], np.tile([3, 0], (12, 9, 1)))
    a = np.zeros((1, 1, 4), np.float32)
    b = np.zeros((1, 1, 4), np.float32)
    a[..., 0] = 1
    b[..., 1] = 1
    vol = correlation_volume(a, b, 1)
    assert abs(vol.scores[0, 0, 4]) < 1e-5
    assert (np.delete(vol.scores[0, 0], 4) == -1).all()


def test_cost_volume_offsets_and_ties():
    vol = CostVolume(np.zeros((1, 1, 9)), 1)
    np.testing.assert_array_equal(vol.offsets()[:3], [[-1, -1], [0, -1], [1, -1]])
    np.testing.assert_array_equal(vol.argmax()[0, 0], [-1, -1])


def test_correlation_dimension_mismatch():
    with pytest.raises(DimensionError):
        correlation_volume(np.zeros((4, 4, 2)), np.zeros((4, 5, 2)), 1)


def test_subpixel_examples():
    assert subpixel_refine(0.9, 1.0, 0.9) == 0
    assert subpixel_refine(0.5, 1.0, 0.9) == pytest.approx(1 / 3, abs=1e-4)
    assert subpixel_refine(1.0, 1.0, 1.0) == 0
    assert -0.5 <= subpixel_refine(1.0, 1.0, 0.0) <= 0.5
    with pytest.raises(ValueError):
        subpixel_refine(1.0, 0.5, 0.2)


def test_structure_features_keep_photometric_invariance(rng):
    img = rng.random((16, 16, 3))
    parts = rng.integers(0, 4, (16, 16))
    a = structure_features(img, parts, 2, 0.25)
    b = structure_features(0.5 * img + 0.1, parts, 2, 0.25)
    np.testing.assert_array_equal(a, b)


def test_identity_pair_has_no_motion(elbow_pair):
    b = elbow_pair.target
    flow = estimate_flow(b, b)
    fg = b.foreground > 0.5
    assert np.hypot(flow.uv[..., 0], flow.uv[..., 1])[fg].mean() < 0.1
    np.testing.assert_array_equal(flow.valid, fg)


def test_translation_and_photometric_invariance(translated_pair):
    pr = translated_pair
    flow = estimate_flow(pr.source, pr.target)
    epe = endpoint_error(flow, pr.gt_flow)[pr.gt_flow.valid]
    assert epe.mean() < 0.5
    s2 = SimpleNamespace(image=pr.source.image * 0.7 + 0.2, part_map=pr.source.part_map,
                         foreground=pr.source.foreground)
    t2 = SimpleNamespace(image=pr.target.image * 0.7 + 0.2, part_map=pr.target.part_map,
                         foreground=pr.target.foreground)
    np.testing.assert_array_equal(estimate_flow(s2, t2).uv, flow.uv)


def test_shift_equivariance(articulated_pair):
    pr = articulated_pair
    k = 8  # a multiple of the coarsest pyramid stride keeps every level aligned

    def shift(b):
        return SimpleNamespace(
            image=np.roll(b.image, (k, k), axis=(0, 1)),
            part_map=np.roll(b.part_map, (k, k), axis=(0, 1)),
            foreground=np.roll(b.foreground, (k, k), axis=(0, 1)),
        )

    a = estimate_flow(pr.source, pr.target)
    b = estimate_flow(shift(pr.source), shift(pr.target))
    fg = pr.target.foreground > 0.5
    # common interior: away from the border in both frames by patch radius plus search
    m = 3 + 4 + 1
    inner = np.zeros_like(fg)
    inner[m:-m - k, m:-m - k] = True
    sel = (fg & inner)[:-k, :-k]
    assert sel.sum() > 1000
    diff = np.abs(b.uv[k:, k:] - a.uv[:-k, :-k])[sel]
    assert diff.max() < 1e-3
    np.testing.assert_array_equal(b.valid[k:, k:], a.valid[:-k, :-k])


def test_levels_out_and_params():
    p = FlowParams()
    assert (p.levels, p.max_disp, p.patch_radius, p.median_filter) == (4, 4, 3, True)
    assert p.search_range() == 60
    with pytest.raises(ValueError):
        FlowParams(levels=0)
    with pytest.raises(ValueError):
        FlowParams(max_disp=(2, 2), levels=3)
    img = np.random.default_rng(0).random((32, 32, 3))
    levels = []
    estimate_flow(bundle(img), bundle(img), FlowParams(levels=3), levels_out=levels)
    assert [lv.shape for lv in levels] == [(8, 8), (16, 16), (32, 32)]


def test_limb_rotation(tight_spec):
    from garmentflow import labels as L
    from garmentflow.synthdata import Pose, make_pair

    pr = make_pair(tight_spec, Pose(), Pose({"l_shoulder": math.radians(15)}))
    flow = estimate_flow(pr.source, pr.target)
    arm = np.isin(pr.target.part_map, L.LEFT_ARM_PARTS)
    assert endpoint_error(flow, pr.gt_flow)[arm].mean() < 1.0
