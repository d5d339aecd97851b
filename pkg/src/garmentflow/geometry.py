"""Fixed-topology 2-D meshes, rasterisation and mesh-induced (vertex) flow.

Pixel ``(x, y)`` of an ``H x W`` grid sits at mesh coordinate ``(x, y)``:
pixel centres are the integer lattice.  Every flow in the package is a
*backward* flow: it is indexed by the target pixel and points at the
position in the source to sample.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, TopologyError
from .flowfield import FlowField
from .kernels import rasterize_faces


@dataclass
class Mesh2D:
    vertices: np.ndarray  # (N, 2) float64, pixel coordinates
    faces: np.ndarray  # (F, 3) int64
    parts: np.ndarray  # (F,) int64, 0 is reserved for background
    allow_degenerate: bool = False

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 2)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        self.parts = np.asarray(self.parts, dtype=np.int64).reshape(-1)
        if len(self.parts) != len(self.faces):
            raise ValueError(
                f"{len(self.faces)} faces but {len(self.parts)} part labels"
            )
        if len(self.faces) and (
            self.faces.min() < 0 or self.faces.max() >= len(self.vertices)
        ):
            raise ValueError("face index out of range of the vertex list")
        if not np.isfinite(self.vertices).all():
            raise ValueError("non-finite vertex coordinates")
        if not self.allow_degenerate and len(self.faces):
            bad = np.flatnonzero(np.abs(self.signed_areas()) <= 1e-9)
            if len(bad):
                raise ValueError(
                    f"{len(bad)} degenerate faces (first: {bad[0]}); "
                    "pass allow_degenerate=True to keep them"
                )

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def signed_areas(self) -> np.ndarray:
        a, b, c = (self.vertices[self.faces[:, k]] for k in range(3))
        return 0.5 * (
            (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
            - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1])
        )

    def with_vertices(self, vertices) -> "Mesh2D":
        return Mesh2D(vertices, self.faces, self.parts, allow_degenerate=True)

    def is_compatible(self, other: "Mesh2D") -> bool:
        return np.array_equal(self.faces, other.faces) and np.array_equal(
            self.parts, other.parts
        )

    def to_json(self) -> dict:
        return {
            "vertices": self.vertices.tolist(),
            "faces": self.faces.tolist(),
            "parts": self.parts.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Mesh2D":
        try:
            return cls(
                data["vertices"], data["faces"], data["parts"], allow_degenerate=True
            )
        except KeyError as exc:
            raise DataError(f"mesh JSON lacks key {exc}") from None

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "Mesh2D":
        path = Path(path)
        if not path.exists():
            raise DataError(f"{path}: file not found")
        try:
            data = json.loads(path.read_text())
            return cls.from_json(data)
        except (json.JSONDecodeError, ValueError, TypeError) as exc:
            raise DataError(f"{path}: {exc}") from None


@dataclass
class CorrespondenceMap:
    """Per-pixel face index (-1 = empty) and barycentric coordinates."""

    face: np.ndarray  # (H, W) int32
    bary: np.ndarray  # (H, W, 3) float64
    n_faces: int
    n_degenerate: int = field(default=0)

    @property
    def height(self) -> int:
        return self.face.shape[0]

    @property
    def width(self) -> int:
        return self.face.shape[1]

    @property
    def covered(self) -> np.ndarray:
        return self.face >= 0


def rasterize(mesh: Mesh2D, width: int, height: int) -> CorrespondenceMap:
    """Scan-convert ``mesh`` onto a ``height x width`` pixel grid.

    Overlaps resolve to the face with the larger part id, then the smaller
    face index.  Degenerate faces are skipped and counted in
    ``n_degenerate``.
    """
    if width <= 0 or height <= 0:
        raise ValueError(f"canvas must be positive, got {width}x{height}")
    face, bary, n_deg = rasterize_faces(
        np.ascontiguousarray(mesh.vertices),
        np.ascontiguousarray(mesh.faces),
        np.ascontiguousarray(mesh.parts),
        int(width),
        int(height),
    )
    return CorrespondenceMap(face, bary, mesh.n_faces, int(n_deg))


def render_part_map(corr: CorrespondenceMap, mesh: Mesh2D) -> np.ndarray:
    if corr.n_faces != mesh.n_faces:
        raise TopologyError(
            f"correspondence map built from {corr.n_faces} faces, mesh has {mesh.n_faces}"
        )
    parts = np.zeros(corr.face.shape, dtype=np.int64)
    cov = corr.covered
    parts[cov] = mesh.parts[corr.face[cov]]
    return parts


def barycentric_positions(mesh: Mesh2D, corr: CorrespondenceMap) -> np.ndarray:
    """Interpolate ``mesh`` vertex positions at every covered pixel.

    Returns an ``(H, W, 2)`` array, zero on uncovered pixels.
    """
    if corr.n_faces != mesh.n_faces:
        raise TopologyError(
            f"correspondence map built from {corr.n_faces} faces, mesh has {mesh.n_faces}"
        )
    out = np.zeros(corr.face.shape + (2,))
    cov = corr.covered
    tri = mesh.faces[corr.face[cov]]  # (n, 3)
    b = corr.bary[cov]  # (n, 3)
    v = mesh.vertices
    out[cov] = (
        b[:, 0:1] * v[tri[:, 0]] + b[:, 1:2] * v[tri[:, 1]] + b[:, 2:3] * v[tri[:, 2]]
    )
    return out


def vertex_flow(
    source: Mesh2D, target: Mesh2D, target_corr: CorrespondenceMap
) -> tuple[FlowField, np.ndarray]:
    """Backward flow from the target raster to the same surface point in the source.

    Returns the flow and the binary coverage mask (float 0/1).
    """
    if not source.is_compatible(target):
        raise TopologyError("source and target meshes do not share faces/part labels")
    if target_corr.n_faces != target.n_faces:
        raise TopologyError("target_corr was not rasterised from the target mesh")
    q = barycentric_positions(source, target_corr)
    h, w = target_corr.face.shape
    ys, xs = np.mgrid[0:h, 0:w]
    cov = target_corr.covered
    uv = np.zeros((h, w, 2))
    uv[..., 0] = np.where(cov, q[..., 0] - xs, 0.0)
    uv[..., 1] = np.where(cov, q[..., 1] - ys, 0.0)
    return FlowField(uv, cov), cov.astype(np.float64)
