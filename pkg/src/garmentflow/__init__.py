"""Garment transfer between posed figures with blended vertex and pixel flow."""

from __future__ import annotations

from ._accel import BACKEND
from .cycleopt import CycleConfig, CycleState, cycle_objective, cycle_refine
from .errors import DataError, DimensionError, GarmentFlowError, NonFiniteObjective, TopologyError
from .flowfield import (
    FlowField,
    blend_wflow,
    compose_flows,
    endpoint_error,
    upsample_flow,
    warp_bilinear,
    warp_gradient,
    warp_image_gradient,
)
from .geometry import CorrespondenceMap, Mesh2D, rasterize, render_part_map, vertex_flow
from .metrics import MetricReport, iou, ssim
from .pipeline import (
    Joint,
    PersonBundle,
    TransferResult,
    fuse_composite,
    inpaint_background,
    sample_pairs,
    transfer,
)
from .pixelflow import FlowParams, estimate_flow
from .synthdata import FramePair, Pose, PuppetSpec, make_pair, make_puppet

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CorrespondenceMap",
    "CycleConfig",
    "CycleState",
    "DataError",
    "DimensionError",
    "FlowField",
    "FlowParams",
    "FramePair",
    "GarmentFlowError",
    "Joint",
    "Mesh2D",
    "MetricReport",
    "NonFiniteObjective",
    "PersonBundle",
    "Pose",
    "PuppetSpec",
    "TopologyError",
    "TransferResult",
    "blend_wflow",
    "compose_flows",
    "cycle_objective",
    "cycle_refine",
    "endpoint_error",
    "estimate_flow",
    "fuse_composite",
    "inpaint_background",
    "iou",
    "make_pair",
    "make_puppet",
    "rasterize",
    "render_part_map",
    "sample_pairs",
    "ssim",
    "transfer",
    "upsample_flow",
    "vertex_flow",
    "warp_bilinear",
    "warp_gradient",
    "warp_image_gradient",
]
