from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from scipy.ndimage import binary_dilation

from garmentflow import labels as L
from garmentflow.flowfield import FlowField, warp_bilinear
from garmentflow.geometry import rasterize
from garmentflow.synthdata import (
    Pose,
    PuppetModel,
    PuppetSpec,
    clamp_pose,
    make_pair,
    make_puppet,
    make_sequence,
)


def test_same_settings_are_bit_identical():
    spec = PuppetSpec(seed=11, garment="loose-skirt", texture="stripes", pose=Pose({"r_knee": 0.3}))
    a, b = make_puppet(spec), make_puppet(spec)
    for x, y in ((a[0].image, b[0].image), (a[0].segmentation, b[0].segmentation),
                 (a[1].vertices, b[1].vertices), (a[2].faces, b[2].faces)):
        assert np.array_equal(x, y)
    assert not np.array_equal(make_puppet(PuppetSpec(seed=12))[0].image, make_puppet(PuppetSpec(seed=11))[0].image)


@pytest.mark.parametrize("garment", ["tight", "loose-skirt"])
def test_t_pose_is_mirror_symmetric(garment):
    bundle, _, _ = make_puppet(PuppetSpec(seed=0, garment=garment))
    fg = bundle.foreground > 0.5
    mirrored = fg[:, ::-1]
    near = np.ones((3, 3), bool)
    assert not (mirrored & ~binary_dilation(fg, near)).any()
    assert not (fg & ~binary_dilation(mirrored, near)).any()


def test_skirt_outside_body_coverage():
    bundle, body, ext = make_puppet(PuppetSpec(seed=1, garment="loose-skirt"))
    skirt = bundle.segmentation == L.SEG_SKIRT
    assert skirt.sum() > 200
    assert (bundle.foreground[skirt] > 0.5).all()
    # the body mesh lies underneath, but none of it is visible through the skirt
    assert (bundle.part_map[skirt] == 0).all()
    h, w = bundle.shape
    cov = rasterize(body, w, h).covered
    assert (cov & (bundle.part_map > 0) == (bundle.part_map > 0)).all()
    assert ext.is_compatible(ext) and len(ext.faces) > len(body.faces)


def test_identical_poses_zero_flow(tight_spec):
    pr = make_pair(tight_spec, Pose({"l_elbow": 0.2}), Pose({"l_elbow": 0.2}))
    assert np.abs(pr.gt_flow.uv[pr.gt_flow.valid]).max() < 1e-9


def test_translation_flow(tight_spec):
    pr = make_pair(tight_spec, Pose(), Pose().translated(7, 3))
    uv = pr.gt_flow.uv[pr.gt_flow.valid]
    # backward flow: target pixels look 7 px left and 3 px up in the source
    np.testing.assert_allclose(uv, np.tile([-7.0, -3.0], (len(uv), 1)), atol=1e-9)


@pytest.mark.parametrize("garment", ["tight", "loose-skirt"])
def test_generator_self_consistency(garment):
    spec = PuppetSpec(seed=4, garment=garment)
    for pose_b in (Pose({"l_elbow": math.radians(20)}), Pose({"r_shoulder": 0.3, "l_knee": 0.2}, (2, -1), sway=1.0)):
        pr = make_pair(spec, Pose(), pose_b)
        fg = pr.target.foreground > 0.5
        warped = warp_bilinear(pr.source.image, pr.gt_flow, fill=0.0)
        assert np.abs(warped - pr.target.image)[fg].mean() < 0.03
        np.testing.assert_array_equal(pr.gt_flow.valid, fg)
        np.testing.assert_array_equal(pr.gt_composite, pr.target.image)
        assert pr.source_mesh.is_compatible(pr.target_mesh)


def test_clamping_warns_and_validates():
    with pytest.warns(UserWarning, match="l_elbow"):
        pose = clamp_pose(Pose({"l_elbow": 10.0}))
    assert abs(pose.angles["l_elbow"]) < 10.0
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        clamp_pose(Pose({"l_elbow": 0.1}))
    with pytest.raises(ValueError):
        clamp_pose(Pose({"tail": 0.1}))
    with pytest.raises(ValueError):
        clamp_pose(Pose({"l_knee": float("nan")}))


@pytest.mark.parametrize(
    "kwargs",
    [{"canvas": (32, 128)}, {"garment": "cape"}, {"texture": "plaid"}, {"bones": {"spine": 0}},
     {"bones": {"antenna": 3}}, {"period": 0}, {"background": "photo"}],
)
def test_invalid_puppet_settings_rejected(kwargs):
    with pytest.raises(ValueError):
        PuppetSpec(**kwargs)


def test_bundle_contents():
    bundle, body, _ = make_puppet(PuppetSpec(seed=3))
    assert bundle.image.shape == (128, 128, 3)
    assert bundle.image.min() >= 0 and bundle.image.max() <= 1
    assert len(bundle.skeleton) == 17 and bundle.visible_joint_count() == 17
    assert set(np.unique(bundle.segmentation)) <= set(L.SEG_NAMES)
    assert (bundle.foreground[bundle.part_map > 0] > 0.5).all()
    assert len(body.vertices) >= 150


def test_sequence_and_scaling(tmp_path):
    frames = make_sequence(PuppetSpec(seed=2), 4)
    assert len(frames) == 4
    assert not np.array_equal(frames[0].bundle.image, frames[3].bundle.image)
    big = PuppetModel(PuppetSpec(seed=2, canvas=(256, 256)))
    small = PuppetModel(PuppetSpec(seed=2))
    p = Pose({"l_elbow": 0.3})
    # a larger canvas scales the figure about a fixed offset
    diff = big.posed_vertices(p) - 2 * small.posed_vertices(p)
    assert np.ptp(diff, axis=0).max() < 1e-9
    pr = make_pair(PuppetSpec(seed=2), Pose(), p)
    pr.save(tmp_path)
    for name in ("source/image.png", "target/mesh.json", "source/mesh_extended.json", "gt_flow.flo", "gt_composite.png"):
        assert (tmp_path / name).exists()
