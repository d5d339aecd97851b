"""End-to-end garment transfer between two posed figures.

``transfer`` runs the test-time path: vertex flow from the two meshes,
pixel flow from the images, their blend, warping of the source, a fusion
mask built from the warped garment silhouette, background inpainting of the
query and the final alpha composite.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import binary_dilation

from . import io
from .errors import DataError, DimensionError, TopologyError
from .flowfield import FlowField, as_hwc, blend_wflow, sample_validity, warp_bilinear
from .geometry import Mesh2D, rasterize, vertex_flow
from .kernels import jacobi_fill
from .labels import GARMENT_LABELS, PROTECTED_LABELS
from .metrics import label_mask
from .pixelflow import FlowParams, estimate_flow

BUNDLE_FILES = (
    "image.png",
    "parts.pgm",
    "segmentation.pgm",
    "skeleton.json",
    "foreground.pgm",
    "mesh.json",
)

FLOW_MODES = ("wflow", "vertex", "pixel")


@dataclass
class Joint:
    name: str
    x: float
    y: float
    visible: bool = True


@dataclass
class PersonBundle:
    image: np.ndarray  # (H, W, C) in [0, 1]
    part_map: np.ndarray  # (H, W) int, body-mesh part ids
    segmentation: np.ndarray  # (H, W) int, garment-level labels
    skeleton: list[Joint]
    foreground: np.ndarray  # (H, W) in [0, 1]

    def __post_init__(self):
        self.image = np.asarray(self.image, dtype=np.float64)
        self.part_map = np.asarray(self.part_map, dtype=np.int64)
        self.segmentation = np.asarray(self.segmentation, dtype=np.int64)
        self.foreground = np.asarray(self.foreground, dtype=np.float64)
        shape = self.image.shape[:2]
        for name in ("part_map", "segmentation", "foreground"):
            if getattr(self, name).shape != shape:
                raise DimensionError(
                    f"{name} {getattr(self, name).shape} does not match image {shape}"
                )
        if np.any((self.part_map > 0) & (self.foreground <= 0.5)):
            raise ValueError("foreground must contain every part-map pixel")

    @property
    def shape(self) -> tuple[int, int]:
        return self.image.shape[:2]

    def visible_joint_count(self) -> int:
        return sum(1 for j in self.skeleton if j.visible)

    def save(self, directory, mesh: Mesh2D | None = None) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        io.write_png(d / "image.png", self.image)
        io.write_pgm(d / "parts.pgm", self.part_map)
        io.write_pgm(d / "segmentation.pgm", self.segmentation)
        io.write_pgm(d / "foreground.pgm", np.round(np.clip(self.foreground, 0, 1) * 255))
        io.write_json(
            d / "skeleton.json",
            {"joints": [vars(j) for j in self.skeleton]},
        )
        if mesh is not None:
            mesh.save(d / "mesh.json")

    @classmethod
    def load(cls, directory, require_mesh: bool = True) -> tuple["PersonBundle", Mesh2D | None]:
        d = Path(directory)
        if not d.is_dir():
            raise DataError(f"{d}: bundle directory not found")
        needed = BUNDLE_FILES if require_mesh else BUNDLE_FILES[:-1]
        for name in needed:
            if not (d / name).exists():
                raise DataError(f"{d / name}: missing bundle file")
        try:
            skel = io.read_json(d / "skeleton.json")
            joints = [Joint(**j) for j in skel["joints"]]
        except (KeyError, TypeError) as exc:
            raise DataError(f"{d / 'skeleton.json'}: malformed ({exc})") from None
        try:
            bundle = cls(
                image=io.read_png(d / "image.png"),
                part_map=io.read_pgm(d / "parts.pgm"),
                segmentation=io.read_pgm(d / "segmentation.pgm"),
                skeleton=joints,
                foreground=io.read_pgm(d / "foreground.pgm") / 255.0,
            )
        except ValueError as exc:
            raise DataError(f"{d}: {exc}") from None
        mesh = Mesh2D.load(d / "mesh.json") if (d / "mesh.json").exists() else None
        return bundle, mesh


@dataclass
class TransferResult:
    warped: np.ndarray
    fusion_mask: np.ndarray
    composite: np.ndarray
    wflow: FlowField
    inpainted_background: np.ndarray
    coarse: np.ndarray
    warped_garment: np.ndarray  # soft silhouette of the source garments
    warped_segmentation: np.ndarray  # nearest-neighbour label warp
    vertex_mask: np.ndarray
    refined: object = field(default=None)  # CycleState when refinement ran


def _coarse_start(values: np.ndarray, hole: np.ndarray) -> np.ndarray:
    """Fill the hole from a half-resolution solve (recursively) as a Jacobi start."""
    h, w, _ = values.shape
    known = ~hole
    out = values.copy()
    if min(h, w) < 8:
        out[hole] = values[known].mean(axis=0)
        return out
    ph, pw = h % 2, w % 2
    v = np.pad(np.where(known[..., None], values, 0.0), ((0, ph), (0, pw), (0, 0)))
    k = np.pad(known, ((0, ph), (0, pw))).astype(np.float64)
    vs = v[0::2, 0::2] + v[0::2, 1::2] + v[1::2, 0::2] + v[1::2, 1::2]
    ks = k[0::2, 0::2] + k[0::2, 1::2] + k[1::2, 0::2] + k[1::2, 1::2]
    coarse_hole = ks == 0
    coarse = np.where(coarse_hole[..., None], 0.0, vs / np.maximum(ks, 1.0)[..., None])
    if coarse_hole.any():
        coarse = _diffuse(coarse, coarse_hole, 200, 1e-4)
    up = np.repeat(np.repeat(coarse, 2, axis=0), 2, axis=1)[:h, :w]
    out[hole] = up[hole]
    return out


def _diffuse(values, hole, iterations, tol):
    start = _coarse_start(values, hole)
    filled, _ = jacobi_fill(np.ascontiguousarray(start), np.ascontiguousarray(hole), int(iterations), float(tol))
    return filled


def inpaint_background(image, hole, iterations: int = 2000, tol: float = 1e-5) -> np.ndarray:
    """Harmonic fill of ``hole`` by Jacobi averaging of 4-neighbours.

    Pixels outside the hole are returned unchanged.  The sweep starts from a
    coarse-to-fine estimate, which only speeds up convergence.
    """
    img, flat = as_hwc(image)
    hole = np.asarray(hole) > 0.5
    if hole.shape != img.shape[:2]:
        raise DimensionError(f"hole {hole.shape} does not match image {img.shape[:2]}")
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    if hole.all():
        raise ValueError("hole covers the whole image; nothing to diffuse from")
    if not hole.any():
        out = img.copy()
    else:
        out = _diffuse(img, hole, iterations, tol)
        out[~hole] = img[~hole]
    return out[..., 0] if flat else out


def fuse_composite(coarse, fusion_mask, background) -> np.ndarray:
    """``coarse * m + background * (1 - m)`` per pixel."""
    c = np.asarray(coarse, dtype=np.float64)
    b = np.asarray(background, dtype=np.float64)
    m = np.asarray(fusion_mask, dtype=np.float64)
    if c.shape != b.shape or c.shape[:2] != m.shape:
        raise DimensionError(
            f"coarse {c.shape}, mask {m.shape} and background {b.shape} must agree"
        )
    if c.ndim == 3:
        m = m[..., None]
    return c * m + b * (1.0 - m)


def disk(radius: int) -> np.ndarray:
    r = np.arange(-radius, radius + 1)
    return (r[:, None] ** 2 + r[None, :] ** 2) <= radius * radius


def dilated_foreground(foreground, radius: int = 5) -> np.ndarray:
    fg = np.asarray(foreground) > 0.5
    if radius <= 0:
        return fg
    return binary_dilation(fg, structure=disk(radius))


def warp_labels(labels, flow: FlowField, fill: int = 0) -> np.ndarray:
    """Nearest-neighbour warp of an integer label grid."""
    lab = np.asarray(labels)
    h, w = lab.shape
    ys, xs = np.mgrid[0 : flow.height, 0 : flow.width]
    sx = np.rint(xs + flow.uv[..., 0]).astype(np.int64)
    sy = np.rint(ys + flow.uv[..., 1]).astype(np.int64)
    ok = flow.valid & (sx >= 0) & (sy >= 0) & (sx < w) & (sy < h)
    out = np.full((flow.height, flow.width), fill, dtype=lab.dtype)
    out[ok] = lab[sy[ok], sx[ok]]
    return out


def warped_silhouette(segmentation, flow: FlowField, labels) -> np.ndarray:
    """Bilinearly warped indicator of ``labels``, in ``[0, 1]``."""
    return np.clip(warp_bilinear(label_mask(segmentation, labels), flow, 0.0), 0.0, 1.0)


def combine_flows(
    source: PersonBundle,
    query: PersonBundle,
    source_mesh: Mesh2D,
    query_mesh: Mesh2D,
    params: FlowParams = FlowParams(),
    mode: str = "wflow",
) -> tuple[FlowField, np.ndarray]:
    """Query-indexed flow into the source for the chosen flow mode, and ``M^v``."""
    if mode not in FLOW_MODES:
        raise ValueError(f"mode must be one of {FLOW_MODES}, got {mode!r}")
    if not source_mesh.is_compatible(query_mesh):
        raise TopologyError("source and query meshes are not topology-compatible")
    if source.shape != query.shape:
        raise DimensionError(f"source {source.shape} and query {query.shape} differ")
    h, w = query.shape
    corr = rasterize(query_mesh, w, h)
    fv, mv = vertex_flow(source_mesh, query_mesh, corr)
    # mesh correspondences are trusted only where body surface is visible
    mv = mv * (query.part_map > 0)
    if mode == "vertex":
        return fv, mv
    fp = estimate_flow(source, query, params)
    if mode == "pixel":
        return fp, mv
    return blend_wflow(fv, mv, fp), mv


def transfer(
    source: PersonBundle,
    query: PersonBundle,
    source_mesh: Mesh2D,
    query_mesh: Mesh2D,
    params: FlowParams = FlowParams(),
    refine=None,
    mode: str = "wflow",
    garment_labels=GARMENT_LABELS,
    protected_labels=PROTECTED_LABELS,
    dilation: int = 5,
) -> TransferResult:
    """Dress ``query`` in the garments of ``source``.

    ``mode`` selects the flow: the blend (``"wflow"``), mesh-only
    (``"vertex"``) or image-only (``"pixel"``).  ``refine`` is an optional
    :class:`~garmentflow.cycleopt.CycleConfig`.
    """
    src_garment = label_mask(source.segmentation, garment_labels)
    if not src_garment.any():
        raise ValueError("source segmentation contains no garment pixels")
    fw, mv = combine_flows(source, query, source_mesh, query_mesh, params, mode)

    background = inpaint_background(query.image, dilated_foreground(query.foreground, dilation))
    fg_q = np.clip(query.foreground, 0.0, 1.0)
    garment_q = label_mask(query.segmentation, garment_labels)
    protected_q = label_mask(query.segmentation, protected_labels)

    def fusion_for(flow):
        silhouette = warped_silhouette(source.segmentation, flow, garment_labels)
        mask = np.maximum(np.maximum(fg_q * (1.0 - garment_q), silhouette), protected_q)
        return mask, silhouette

    fusion, warped_garment = fusion_for(fw)
    state = None
    if refine is not None:
        from .cycleopt import cycle_refine

        bwd, _ = combine_flows(query, source, query_mesh, source_mesh, params, mode)
        state = cycle_refine(
            source, query, fw, bwd, refine, mask_fwd=fusion, background_query=background
        )
        fw = state.flow_fwd
        _, warped_garment = fusion_for(fw)
        fusion = state.fusion_fwd()

    warped = warp_bilinear(source.image, fw, fill=0.0)
    inb = sample_validity(source.shape, fw)
    coarse = np.where(
        protected_q[..., None] > 0.5,
        query.image,
        np.where(inb[..., None], warped, background),
    )
    composite = fuse_composite(coarse, fusion, background)
    return TransferResult(
        warped=warped,
        fusion_mask=fusion,
        composite=composite,
        wflow=fw,
        inpainted_background=background,
        coarse=coarse,
        warped_garment=warped_garment,
        warped_segmentation=warp_labels(source.segmentation, fw),
        vertex_mask=mv,
        refined=state,
    )


def candidate_pairs(n_frames: int) -> list[tuple[int, int]]:
    """All unordered frame pairs ``(i, j)``, ``i < j``."""
    if n_frames < 2:
        raise ValueError(f"need at least 2 frames, got {n_frames}")
    return list(itertools.combinations(range(n_frames), 2))


def subsample_indices(n_frames: int, per_video: int) -> list[int]:
    if per_video > n_frames:
        raise ValueError(f"cannot sample {per_video} frames from {n_frames}")
    if per_video < 2:
        raise ValueError(f"need at least 2 sampled frames, got {per_video}")
    return [int(i) for i in np.round(np.linspace(0, n_frames - 1, per_video))]


def sample_pairs(frames, per_video: int | None = None) -> list[tuple[int, int]]:
    """Oriented ``(source, target)`` training pairs over uniformly sampled frames.

    The frame with more visible joints becomes the source.  Equal counts
    keep both orientations.  Indices refer to ``frames``.
    """
    n = len(frames)
    if n < 2:
        raise ValueError(f"need at least 2 frames, got {n}")
    idx = subsample_indices(n, n if per_video is None else per_video)
    counts = {i: frames[i].visible_joint_count() for i in idx}
    pairs = []
    for a, b in itertools.combinations(idx, 2):
        if counts[a] > counts[b]:
            pairs.append((a, b))
        elif counts[b] > counts[a]:
            pairs.append((b, a))
        else:
            pairs.extend([(a, b), (b, a)])
    return pairs
