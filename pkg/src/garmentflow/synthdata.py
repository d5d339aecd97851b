"""Deterministic articulated 2-D puppets with exact ground truth.

A puppet is a fixed-topology triangle mesh in a T-shaped rest pose,
skinned to 13 bones (root, spine, head, two 3-bone arms, two 2-bone legs)
with linear blending across each joint.  Texture is a function of the
*rest* position of a surface point, so two renders of the same puppet in
different poses are related exactly by the mesh correspondence.

``garment="loose-skirt"`` adds a flared skirt that follows the root plus a
seeded sinusoidal sway.  Its faces live only in the extended mesh: the
body mesh (and therefore the vertex flow) never covers them.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import io
from . import labels as L
from .flowfield import FlowField
from .geometry import Mesh2D, barycentric_positions, rasterize, render_part_map, vertex_flow
from .pipeline import Joint, PersonBundle

BONES = (
    "root",
    "spine",
    "head",
    "l_upper_arm",
    "l_lower_arm",
    "l_hand",
    "r_upper_arm",
    "r_lower_arm",
    "r_hand",
    "l_thigh",
    "l_shin",
    "r_thigh",
    "r_shin",
)
B = {name: i for i, name in enumerate(BONES)}

# pose angle -> (bone it drives, limit in degrees)
JOINT_LIMITS = {
    "root": ("root", 45.0),
    "spine": ("spine", 30.0),
    "neck": ("head", 40.0),
    "l_shoulder": ("l_upper_arm", 150.0),
    "l_elbow": ("l_lower_arm", 150.0),
    "l_wrist": ("l_hand", 80.0),
    "r_shoulder": ("r_upper_arm", 150.0),
    "r_elbow": ("r_lower_arm", 150.0),
    "r_wrist": ("r_hand", 80.0),
    "l_hip": ("l_thigh", 80.0),
    "l_knee": ("l_shin", 150.0),
    "r_hip": ("r_thigh", 80.0),
    "r_knee": ("r_shin", 150.0),
}

# rest-pose lengths in units of canvas/128 pixels
DEFAULT_BONES = {
    "spine": 34.0,
    "neck": 11.0,
    "head_radius": 9.0,
    "shoulder_width": 12.0,
    "upper_arm": 18.0,
    "lower_arm": 16.0,
    "hand": 6.0,
    "hip_width": 6.5,
    "thigh": 24.0,
    "shin": 24.0,
}

SKIN_TONE = (0.86, 0.66, 0.52)
BASE_COLORS = {
    L.SEG_SKIN: SKIN_TONE,
    L.SEG_TOP: (0.22, 0.38, 0.72),
    L.SEG_PANTS: (0.30, 0.30, 0.36),
    L.SEG_SKIRT: (0.72, 0.24, 0.32),
    L.SEG_FACE: (0.90, 0.72, 0.58),
    L.SEG_HAIR: (0.24, 0.15, 0.08),
    L.SEG_HANDS: (0.88, 0.68, 0.54),
}
PATTERN_AMPLITUDE = {L.SEG_HAIR: 0.12, L.SEG_FACE: 0.14, L.SEG_HANDS: 0.16, L.SEG_SKIN: 0.18}
GARMENT_AMPLITUDE = 0.26

BACKGROUND_FLAT = (0.5, 0.625, 0.75)

JOINT_NAMES = (
    "pelvis",
    "neck",
    "head",
    "l_shoulder",
    "l_elbow",
    "l_wrist",
    "l_hand",
    "r_shoulder",
    "r_elbow",
    "r_wrist",
    "r_hand",
    "l_hip",
    "l_knee",
    "l_ankle",
    "r_hip",
    "r_knee",
    "r_ankle",
)


@dataclass(frozen=True)
class Pose:
    """Joint angles in radians, a root offset in pixels and a skirt sway phase."""

    angles: dict = field(default_factory=dict)
    offset: tuple[float, float] = (0.0, 0.0)
    sway: float = 0.0

    def with_angles(self, **angles) -> "Pose":
        merged = dict(self.angles)
        merged.update(angles)
        return replace(self, angles=merged)

    def translated(self, dx: float, dy: float) -> "Pose":
        return replace(self, offset=(self.offset[0] + dx, self.offset[1] + dy))


@dataclass(frozen=True)
class PuppetSpec:
    seed: int = 0
    canvas: tuple[int, int] = (128, 128)  # (W, H)
    bones: dict = field(default_factory=dict)  # overrides of DEFAULT_BONES
    pose: Pose = field(default_factory=Pose)
    garment: str = "tight"
    texture: str = "noise"
    period: float = 14.0  # texture period, pixels
    background: str = "flat"

    def __post_init__(self):
        w, h = self.canvas
        if w < 64 or h < 64:
            raise ValueError(f"canvas must be at least 64x64, got {w}x{h}")
        if self.garment not in ("tight", "loose-skirt"):
            raise ValueError(f"unknown garment {self.garment!r}")
        if self.texture not in ("noise", "checker", "stripes"):
            raise ValueError(f"unknown texture {self.texture!r}")
        if self.background not in ("flat", "gradient", "textured"):
            raise ValueError(f"unknown background {self.background!r}")
        if self.period <= 0:
            raise ValueError("texture period must be positive")
        unknown = set(self.bones) - set(DEFAULT_BONES)
        if unknown:
            raise ValueError(f"unknown bone keys: {sorted(unknown)}")
        for name, value in self.bones.items():
            if not value > 0:
                raise ValueError(f"bone length {name} must be positive")

    @property
    def scale(self) -> float:
        return min(self.canvas) / 128.0

    def length(self, name: str) -> float:
        return self.bones.get(name, DEFAULT_BONES[name]) * self.scale


@dataclass
class Puppet:
    bundle: PersonBundle
    mesh: Mesh2D  # body only
    extended: Mesh2D  # body plus loose garment faces
    pose: Pose


@dataclass
class FramePair:
    source: PersonBundle
    source_mesh: Mesh2D
    source_extended: Mesh2D
    target: PersonBundle
    target_mesh: Mesh2D
    target_extended: Mesh2D
    gt_flow: FlowField
    gt_composite: np.ndarray

    def save(self, directory) -> None:
        """``source/`` and ``target/`` bundle dirs plus ``gt_flow.flo`` and ``gt_composite.png``."""
        d = Path(directory)
        self.source.save(d / "source", self.source_mesh)
        self.target.save(d / "target", self.target_mesh)
        self.source_extended.save(d / "source" / "mesh_extended.json")
        self.target_extended.save(d / "target" / "mesh_extended.json")
        io.write_flo(d / "gt_flow.flo", self.gt_flow)
        io.write_png(d / "gt_composite.png", self.gt_composite)


# ---------------------------------------------------------------- rest mesh


class _RestMesh:
    """Accumulates rest vertices, per-vertex bone weights and labelled faces."""

    def __init__(self):
        self.verts: list[tuple[float, float]] = []
        self.weights: list[np.ndarray] = []
        self.faces: list[tuple[int, int, int]] = []
        self.parts: list[int] = []
        self.skirt_vertex: list[bool] = []

    def vertex(self, x, y, weights, skirt=False) -> int:
        self.verts.append((float(x), float(y)))
        self.weights.append(weights)
        self.skirt_vertex.append(skirt)
        return len(self.verts) - 1

    def face(self, a, b, c, part):
        self.faces.append((a, b, c))
        self.parts.append(part)

    def grid(self, rows, part_of_cell):
        """Triangulate a grid of vertex-index rows (all rows equally long)."""
        for r in range(len(rows) - 1):
            for c in range(len(rows[r]) - 1):
                part = part_of_cell(r, c)
                a, b = rows[r][c], rows[r][c + 1]
                d, e = rows[r + 1][c], rows[r + 1][c + 1]
                self.face(a, b, e, part)
                self.face(a, e, d, part)


def _onehot(bone: str) -> np.ndarray:
    w = np.zeros(len(BONES))
    w[B[bone]] = 1.0
    return w


def _chain_weights(s, joints, bones, blend):
    """Linear-blend weights along a chain; ``joints[k]`` starts ``bones[k + 1]``."""
    w = np.zeros(len(BONES))
    t = [min(max((s - j + blend) / (2 * blend), 0.0), 1.0) for j in joints]
    w[B[bones[0]]] += 1.0 - t[0]
    for k in range(1, len(bones) - 1):
        w[B[bones[k]]] += t[k - 1] - t[k]
    w[B[bones[-1]]] += t[-1]
    return w


def _rest_layout(spec: PuppetSpec) -> dict:
    w, h = spec.canvas
    u = spec.scale
    px, py = (w - 1) / 2.0, 0.56 * h
    neck = (px, py - spec.length("spine"))
    head = (px, neck[1] - spec.length("neck"))
    sh = spec.length("shoulder_width")
    hw = spec.length("hip_width")
    lay = {"pelvis": (px, py), "neck": neck, "head": head, "u": u}
    for side, sign in (("l", -1.0), ("r", 1.0)):
        shoulder = (px + sign * sh, neck[1] + 3 * u)
        elbow = (shoulder[0] + sign * spec.length("upper_arm"), shoulder[1])
        wrist = (elbow[0] + sign * spec.length("lower_arm"), shoulder[1])
        hand = (wrist[0] + sign * spec.length("hand"), shoulder[1])
        hip = (px + sign * hw, py)
        knee = (hip[0], py + spec.length("thigh"))
        ankle = (hip[0], knee[1] + spec.length("shin"))
        lay.update(
            {
                f"{side}_shoulder": shoulder,
                f"{side}_elbow": elbow,
                f"{side}_wrist": wrist,
                f"{side}_hand": hand,
                f"{side}_hip": hip,
                f"{side}_knee": knee,
                f"{side}_ankle": ankle,
            }
        )
    return lay


def _build_rest_mesh(spec: PuppetSpec, lay: dict) -> _RestMesh:
    m = _RestMesh()
    u = lay["u"]
    px, py = lay["pelvis"]
    neck_y = lay["neck"][1]

    # torso: trapezoid from just below the pelvis up to the neck
    spine = _onehot("spine")
    ys = np.linspace(py + 4 * u, neck_y + 1 * u, 7)
    rows = []
    for y in ys:
        t = (py + 4 * u - y) / (py + 3 * u - neck_y)
        half = (11.0 + 3.0 * t) * u
        rows.append([m.vertex(px + f * half, y, spine) for f in np.linspace(-1, 1, 5)])
    m.grid(rows, lambda r, c: L.TORSO)

    # head: fan around the centre, top half labelled hair
    head_w = _onehot("head")
    hx, hy = lay["head"]
    rad = spec.length("head_radius")
    centre = m.vertex(hx, hy, head_w)
    n_ring = 16
    ring = [
        m.vertex(hx + rad * math.sin(2 * math.pi * k / n_ring), hy - rad * math.cos(2 * math.pi * k / n_ring), head_w)
        for k in range(n_ring)
    ]
    for k in range(n_ring):
        mid = 2 * math.pi * (k + 0.5) / n_ring
        part = L.HAIR if math.cos(mid) > 0.3 else L.FACE
        m.face(centre, ring[k], ring[(k + 1) % n_ring], part)

    blend = 3.0 * u
    # arms: one strip from inside the shoulder to the hand tip
    for side, sign, parts in (
        ("l", -1.0, L.LEFT_ARM_PARTS),
        ("r", 1.0, L.RIGHT_ARM_PARTS),
    ):
        sx, sy = lay[f"{side}_shoulder"]
        ex = lay[f"{side}_elbow"][0]
        wx = lay[f"{side}_wrist"][0]
        tx = lay[f"{side}_hand"][0]
        s_elbow = abs(ex - sx)
        s_wrist = abs(wx - sx)
        s_tip = abs(tx - sx)
        bones = (f"{side}_upper_arm", f"{side}_lower_arm", f"{side}_hand")
        n = max(int(round((s_tip + 3 * u) / (3.0 * u))), 6)
        ss = np.linspace(-3 * u, s_tip, n + 1)
        rows = []
        for s in ss:
            if s < s_elbow:
                half = 4.2 * u
            elif s < s_wrist:
                half = 3.6 * u
            else:
                half = 3.9 * u
            wts = _chain_weights(s, (s_elbow, s_wrist), bones, blend)
            x = sx + sign * s
            rows.append([m.vertex(x, sy + f * half, wts) for f in (-1.0, 0.0, 1.0)])
        mids = 0.5 * (ss[:-1] + ss[1:])

        def arm_part(r, c, mids=mids, s_elbow=s_elbow, s_wrist=s_wrist, parts=parts):
            s = mids[r]
            return parts[0] if s < s_elbow else parts[1] if s < s_wrist else parts[2]

        m.grid(rows, arm_part)

    # legs: strips from the hip down to the ankle
    for side, parts in (("l", (L.L_UPPER_LEG, L.L_LOWER_LEG)), ("r", (L.R_UPPER_LEG, L.R_LOWER_LEG))):
        hx_, hy_ = lay[f"{side}_hip"]
        s_knee = lay[f"{side}_knee"][1] - hy_
        s_end = lay[f"{side}_ankle"][1] - hy_ + 2 * u
        bones = ("root", f"{side}_thigh", f"{side}_shin")
        n = max(int(round((s_end + 3 * u) / (3.0 * u))), 6)
        ss = np.linspace(-3 * u, s_end, n + 1)
        rows = []
        for s in ss:
            half = (5.6 if s < s_knee else 4.6) * u
            # the thigh takes over from the root just below the hip
            wts = _chain_weights(s, (0.0, s_knee), bones, blend)
            rows.append([m.vertex(hx_ + f * half, hy_ + s, wts) for f in (-1.0, 0.0, 1.0)])
        mids = 0.5 * (ss[:-1] + ss[1:])
        m.grid(rows, lambda r, c, mids=mids, s_knee=s_knee, parts=parts: parts[0] if mids[r] < s_knee else parts[1])

    return m


def _add_skirt(m: _RestMesh, lay: dict) -> None:
    u = lay["u"]
    px, py = lay["pelvis"]
    root = _onehot("root")
    top, bottom = py - 3 * u, py + 30 * u
    rows = []
    for y in np.linspace(top, bottom, 8):
        t = (y - top) / (bottom - top)
        half = (12.5 + 15.0 * t) * u
        rows.append([m.vertex(px + f * half, y, root, skirt=True) for f in np.linspace(-1, 1, 9)])
    m.grid(rows, lambda r, c: L.SKIRT_PART)


# ---------------------------------------------------------------- posing


def _rot_about(theta, cx, cy):
    c, s = math.cos(theta), math.sin(theta)
    return np.array(
        [
            [c, -s, cx - c * cx + s * cy],
            [s, c, cy - s * cx - c * cy],
            [0.0, 0.0, 1.0],
        ]
    )


def clamp_pose(pose: Pose) -> Pose:
    """Clamp every angle to its joint limit, warning about each clamp."""
    unknown = set(pose.angles) - set(JOINT_LIMITS)
    if unknown:
        raise ValueError(f"unknown pose angles: {sorted(unknown)}")
    clamped = {}
    for name, value in pose.angles.items():
        value = float(value)
        if not math.isfinite(value):
            raise ValueError(f"angle {name} is not finite")
        lim = math.radians(JOINT_LIMITS[name][1])
        if abs(value) > lim:
            warnings.warn(
                f"{name} angle {math.degrees(value):.1f} deg clamped to +/-{JOINT_LIMITS[name][1]:.0f}",
                stacklevel=3,
            )
            value = math.copysign(lim, value)
        clamped[name] = value
    return replace(pose, angles=clamped)


def bone_transforms(lay: dict, pose: Pose) -> np.ndarray:
    """World transform (3x3) of every bone, acting on rest coordinates."""
    a = pose.angles
    g = lambda name: a.get(name, 0.0)  # noqa: E731
    dx, dy = pose.offset
    T = np.zeros((len(BONES), 3, 3))
    shift = np.array([[1.0, 0.0, dx], [0.0, 1.0, dy], [0.0, 0.0, 1.0]])
    T[B["root"]] = shift @ _rot_about(g("root"), *lay["pelvis"])
    T[B["spine"]] = T[B["root"]] @ _rot_about(g("spine"), *lay["pelvis"])
    T[B["head"]] = T[B["spine"]] @ _rot_about(g("neck"), *lay["neck"])
    for side in ("l", "r"):
        T[B[f"{side}_upper_arm"]] = T[B["spine"]] @ _rot_about(g(f"{side}_shoulder"), *lay[f"{side}_shoulder"])
        T[B[f"{side}_lower_arm"]] = T[B[f"{side}_upper_arm"]] @ _rot_about(g(f"{side}_elbow"), *lay[f"{side}_elbow"])
        T[B[f"{side}_hand"]] = T[B[f"{side}_lower_arm"]] @ _rot_about(g(f"{side}_wrist"), *lay[f"{side}_wrist"])
        T[B[f"{side}_thigh"]] = T[B["root"]] @ _rot_about(g(f"{side}_hip"), *lay[f"{side}_hip"])
        T[B[f"{side}_shin"]] = T[B[f"{side}_thigh"]] @ _rot_about(g(f"{side}_knee"), *lay[f"{side}_knee"])
    return T


def _skin(rest: np.ndarray, weights: np.ndarray, T: np.ndarray) -> np.ndarray:
    homo = np.concatenate([rest, np.ones((len(rest), 1))], axis=1)
    per_bone = np.einsum("bij,nj->nbi", T, homo)[..., :2]  # (N, bones, 2)
    return np.einsum("nb,nbi->ni", weights, per_bone)


def _skirt_sway(rest: np.ndarray, lay: dict, pose: Pose, seed: int) -> np.ndarray:
    """Seeded sinusoidal horizontal sway growing towards the hem."""
    rng = np.random.default_rng([seed, 7919])
    freq = rng.uniform(0.6, 1.2)
    phase0 = rng.uniform(0, 2 * math.pi)
    u = lay["u"]
    top = lay["pelvis"][1] - 3 * u
    depth = np.clip((rest[:, 1] - top) / (33 * u), 0.0, 1.0)
    wave = np.sin(phase0 + pose.sway + freq * depth * math.pi)
    out = np.zeros_like(rest)
    out[:, 0] = 5.0 * u * math.sin(pose.sway) * depth**1.5 + 1.5 * u * wave * depth**2
    return out


# ---------------------------------------------------------------- texture


class _Texture:
    """Colour as a function of (segmentation label, rest position)."""

    def __init__(self, spec: PuppetSpec):
        self.kind = spec.texture
        self.period = spec.period * spec.scale
        rng = np.random.default_rng([spec.seed, 104729])
        self.noise = {}
        for label in sorted(BASE_COLORS) + [-1]:
            k = 8
            lam = rng.uniform(0.7, 1.6, size=k) * self.period
            ang = rng.uniform(0, math.pi, size=k)
            freq = np.stack([np.cos(ang), np.sin(ang)], axis=1) * (2 * math.pi / lam)[:, None]
            phases = rng.uniform(0, 2 * math.pi, size=(2, k))
            colours = rng.normal(size=(2, 3))
            colours /= np.linalg.norm(colours, axis=1, keepdims=True)
            self.noise[label] = (freq, phases, colours)

    def _noise(self, label, xy):
        freq, phases, colours = self.noise[label]
        arg = xy @ freq.T  # (n, k)
        n1 = np.sin(arg + phases[0]).sum(axis=1) / 2.0
        n2 = np.sin(1.3 * arg[:, ::-1] + phases[1]).sum(axis=1) / 2.0
        return np.clip(n1, -1.5, 1.5)[:, None] * colours[0] + np.clip(n2, -1.5, 1.5)[:, None] * colours[1] * 0.5

    def colour(self, label: int, xy: np.ndarray) -> np.ndarray:
        base = np.asarray(BASE_COLORS[label])
        amp = PATTERN_AMPLITUDE.get(label, GARMENT_AMPLITUDE)
        if self.kind == "noise":
            pattern = self._noise(label, xy) / 1.5
        else:
            p = self.period
            if self.kind == "checker":
                cell = (np.floor(xy[:, 0] / p) + np.floor(xy[:, 1] / p)) % 2
            else:
                cell = np.floor(xy[:, 0] / p) % 2
            pattern = ((2.0 * cell - 1.0)[:, None]) * np.ones(3)
        return np.clip(base + amp * pattern, 0.02, 0.98)

    def background(self, spec: PuppetSpec) -> np.ndarray:
        w, h = spec.canvas
        img = np.empty((h, w, 3))
        img[:] = BACKGROUND_FLAT
        if spec.background == "gradient":
            ramp = np.linspace(-0.15, 0.15, w)[None, :, None] + np.linspace(-0.1, 0.1, h)[:, None, None]
            img = img + ramp
        elif spec.background == "textured":
            ys, xs = np.mgrid[0:h, 0:w]
            xy = np.stack([xs.ravel(), ys.ravel()], axis=1).astype(np.float64)
            img = img + 0.12 * self._noise(-1, xy).reshape(h, w, 3) / 1.5
        return np.clip(img, 0.0, 1.0)


# ---------------------------------------------------------------- rendering


def _face_segmentation(parts: np.ndarray, garment: str) -> np.ndarray:
    legs = L.SEG_PANTS if garment == "tight" else L.SEG_SKIN
    table = {
        L.TORSO: L.SEG_TOP,
        L.FACE: L.SEG_FACE,
        L.HAIR: L.SEG_HAIR,
        L.L_UPPER_ARM: L.SEG_TOP,
        L.R_UPPER_ARM: L.SEG_TOP,
        L.L_LOWER_ARM: L.SEG_SKIN,
        L.R_LOWER_ARM: L.SEG_SKIN,
        L.L_HAND: L.SEG_HANDS,
        L.R_HAND: L.SEG_HANDS,
        L.L_UPPER_LEG: legs,
        L.R_UPPER_LEG: legs,
        L.L_LOWER_LEG: legs,
        L.R_LOWER_LEG: legs,
        L.SKIRT_PART: L.SEG_SKIRT,
    }
    return np.array([table[int(p)] for p in parts], dtype=np.int64)


class PuppetModel:
    """Rest mesh, skinning weights and texture for one :class:`PuppetSpec`."""

    def __init__(self, spec: PuppetSpec):
        self.spec = spec
        self.layout = _rest_layout(spec)
        rest = _build_rest_mesh(spec, self.layout)
        n_body_faces = len(rest.faces)
        if spec.garment == "loose-skirt":
            _add_skirt(rest, self.layout)
        self.rest = np.array(rest.verts)
        self.weights = np.array(rest.weights)
        self.skirt_vertex = np.array(rest.skirt_vertex)
        self.faces = np.array(rest.faces, dtype=np.int64)
        self.parts = np.array(rest.parts, dtype=np.int64)
        self.n_body_faces = n_body_faces
        self.face_seg = _face_segmentation(self.parts, spec.garment)
        self.texture = _Texture(spec)
        self.rest_mesh = Mesh2D(self.rest, self.faces, self.parts, allow_degenerate=True)

    def posed_vertices(self, pose: Pose) -> np.ndarray:
        T = bone_transforms(self.layout, pose)
        verts = _skin(self.rest, self.weights, T)
        if self.skirt_vertex.any():
            sway = _skirt_sway(self.rest[self.skirt_vertex], self.layout, pose, self.spec.seed)
            verts[self.skirt_vertex] += sway
        return verts

    def meshes(self, pose: Pose) -> tuple[Mesh2D, Mesh2D]:
        verts = self.posed_vertices(pose)
        extended = Mesh2D(verts, self.faces, self.parts, allow_degenerate=True)
        nb = self.n_body_faces
        # body faces come first, so the vertex list can be shared as is
        body = Mesh2D(verts, self.faces[:nb], self.parts[:nb], allow_degenerate=True)
        return body, extended

    def joints(self, pose: Pose) -> list[Joint]:
        T = bone_transforms(self.layout, pose)
        lay = self.layout
        owner = {
            "pelvis": "root",
            "neck": "spine",
            "head": "head",
            "l_hip": "root",
            "r_hip": "root",
        }
        for side in ("l", "r"):
            owner.update(
                {
                    f"{side}_shoulder": "spine",
                    f"{side}_elbow": f"{side}_upper_arm",
                    f"{side}_wrist": f"{side}_lower_arm",
                    f"{side}_hand": f"{side}_hand",
                    f"{side}_knee": f"{side}_thigh",
                    f"{side}_ankle": f"{side}_shin",
                }
            )
        w, h = self.spec.canvas
        out = []
        for name in JOINT_NAMES:
            x, y = lay[name]
            px, py, _ = T[B[owner[name]]] @ np.array([x, y, 1.0])
            visible = bool(0 <= px <= w - 1 and 0 <= py <= h - 1)
            out.append(Joint(name, float(px), float(py), visible))
        return out

    def render(self, pose: Pose) -> Puppet:
        pose = clamp_pose(pose)
        body, extended = self.meshes(pose)
        w, h = self.spec.canvas
        corr_ext = rasterize(extended, w, h)
        corr_body = rasterize(body, w, h)
        cov = corr_ext.covered
        rest_xy = barycentric_positions(self.rest_mesh, corr_ext)
        image = self.texture.background(self.spec)
        seg = np.zeros((h, w), dtype=np.int64)
        face_seg = self.face_seg[corr_ext.face[cov]]
        seg[cov] = face_seg
        pts = rest_xy[cov]
        colours = np.empty((len(pts), 3))
        for label in np.unique(face_seg):
            sel = face_seg == label
            colours[sel] = self.texture.colour(int(label), pts[sel])
        image[cov] = colours
        # like a dense body-surface detector, the part map only reports
        # body surface that is visible, so the skirt hides the legs under it
        parts = render_part_map(corr_body, body)
        parts[corr_ext.face >= body.n_faces] = 0
        bundle = PersonBundle(
            image=image,
            part_map=parts,
            segmentation=seg,
            skeleton=self.joints(pose),
            foreground=cov.astype(np.float64),
        )
        return Puppet(bundle, body, extended, pose)


def make_puppet(spec: PuppetSpec) -> tuple[PersonBundle, Mesh2D, Mesh2D]:
    """Render ``spec.pose``: bundle, body mesh and extended (garment) mesh."""
    p = PuppetModel(spec).render(spec.pose)
    return p.bundle, p.mesh, p.extended


def pair_from_puppets(a: Puppet, b: Puppet) -> FramePair:
    w = a.bundle.shape[1]
    h = a.bundle.shape[0]
    corr = rasterize(b.extended, w, h)
    gt, _ = vertex_flow(a.extended, b.extended, corr)
    return FramePair(
        source=a.bundle,
        source_mesh=a.mesh,
        source_extended=a.extended,
        target=b.bundle,
        target_mesh=b.mesh,
        target_extended=b.extended,
        gt_flow=gt,
        gt_composite=b.bundle.image.copy(),
    )


def make_pair(spec: PuppetSpec, pose_a: Pose, pose_b: Pose) -> FramePair:
    """Render the same puppet in two poses; ``pose_a`` is the source.

    ``gt_flow`` is indexed by target pixels and covers loose garments too.
    """
    model = PuppetModel(spec)
    return pair_from_puppets(model.render(pose_a), model.render(pose_b))


def dance_pose(seed: int, t: float, canvas=(128, 128)) -> Pose:
    """A smooth seeded pose trajectory; ``t`` in ``[0, 1]`` spans one clip."""
    rng = np.random.default_rng([seed, 31337])
    names = sorted(JOINT_LIMITS)
    amp = rng.uniform(0.05, 0.5, size=len(names))
    freq = rng.uniform(0.5, 2.0, size=len(names))
    phase = rng.uniform(0, 2 * math.pi, size=len(names))
    angles = {
        n: float(amp[i] * math.sin(2 * math.pi * freq[i] * t + phase[i]))
        for i, n in enumerate(names)
    }
    angles["root"] *= 0.3
    angles["spine"] *= 0.5
    s = min(canvas) / 128.0
    # the figure drifts sideways enough to push a hand out of frame at times
    dx = 26.0 * s * math.sin(2 * math.pi * (t + rng.uniform()))
    dy = 4.0 * s * math.sin(4 * math.pi * t)
    sway = float(2 * math.pi * t * rng.uniform(1.0, 2.0))
    return Pose(angles, (dx, dy), sway)


def make_sequence(spec: PuppetSpec, n_frames: int) -> list[Puppet]:
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    model = PuppetModel(spec)
    ts = np.linspace(0.0, 1.0, n_frames, endpoint=False)
    return [model.render(dance_pose(spec.seed, float(t), spec.canvas)) for t in ts]
