from __future__ import annotations

import math

import numpy as np
import pytest

from garmentflow.flowfield import FlowField
from garmentflow.geometry import rasterize, vertex_flow
from garmentflow.synthdata import Pose, PuppetSpec, make_pair


def backward_gt(pair):
    """Source-indexed ground-truth flow into the target (the reverse of ``gt_flow``)."""
    h, w = pair.target.shape
    flow, _ = vertex_flow(
        pair.target_extended, pair.source_extended, rasterize(pair.source_extended, w, h)
    )
    return flow


def shifted(flow: FlowField, dx: float, dy: float) -> FlowField:
    uv = flow.uv.copy()
    uv[..., 0] += dx
    uv[..., 1] += dy
    return FlowField(uv, flow.valid)


@pytest.fixture(scope="session")
def tight_spec():
    return PuppetSpec(seed=5, canvas=(128, 128))


@pytest.fixture(scope="session")
def elbow_pair(tight_spec):
    return make_pair(tight_spec, Pose(), Pose({"l_elbow": math.radians(20)}))


@pytest.fixture(scope="session")
def articulated_pair(tight_spec):
    pose_b = Pose({"l_elbow": math.radians(20), "r_shoulder": 0.2}).translated(3, 1)
    return make_pair(tight_spec, Pose(), pose_b)


@pytest.fixture(scope="session")
def translated_pair(tight_spec):
    return make_pair(tight_spec, Pose(), Pose().translated(5, -3))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
