"""Parametric hand skeleton: shape-blended rest joints, axis-angle forward
kinematics over a 21-keypoint tree, and linear blend skinning.

Keypoint ordering is fixed throughout the package: wrist first, then thumb,
index, middle, ring, pinky, each finger as MCP, PIP, DIP, TIP.  The wrist and
the fifteen non-tip finger joints carry one axis-angle rotation each (16
total); the five fingertips are leaf sites that rigidly follow their parents.

All positions are in meters.  Joint sets are plain float64 arrays of shape
(21, 3) in the ordering above.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

N_KEYPOINTS = 21
N_ROTATIONS = 16
N_SHAPE_COEFFS = 10

FINGER_NAMES = ("thumb", "index", "middle", "ring", "pinky")
KEYPOINT_NAMES = ("wrist",) + tuple(
    f"{finger}_{part}" for finger in FINGER_NAMES for part in ("mcp", "pip", "dip", "tip")
)

# Parent index per keypoint; -1 marks the wrist root.
PARENT_TREE = (-1, 0, 1, 2, 3, 0, 5, 6, 7, 0, 9, 10, 11, 0, 13, 14, 15, 0, 17, 18, 19)

TIP_INDICES = (4, 8, 12, 16, 20)
ARTICULATED_MASK = tuple(i not in TIP_INDICES for i in range(N_KEYPOINTS))

_SMALL_ANGLE = 1e-8

MODEL_FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """Raised when a hand model file violates the documented schema."""


@dataclass(frozen=True)
class HandPose:
    """16 axis-angle joint rotations; index 0 is the global wrist rotation."""

    rotations: np.ndarray  # (16, 3) radians

    def __post_init__(self):
        rot = np.asarray(self.rotations, dtype=np.float64)
        if rot.shape != (N_ROTATIONS, 3):
            raise ValueError(f"pose must have shape ({N_ROTATIONS}, 3), got {rot.shape}")
        if not np.all(np.isfinite(rot)):
            raise ValueError("pose contains non-finite components")
        object.__setattr__(self, "rotations", rot)

    @classmethod
    def zeros(cls) -> "HandPose":
        return cls(np.zeros((N_ROTATIONS, 3)))

    def canonicalized(self) -> "HandPose":
        """Same rotations with every axis-angle magnitude wrapped into [0, pi]."""
        return HandPose(canonicalize_axis_angle(self.rotations))


@dataclass(frozen=True)
class HandShape:
    """10 PCA shape coefficients; the zero vector is the mean shape."""

    betas: np.ndarray  # (10,)

    def __post_init__(self):
        b = np.asarray(self.betas, dtype=np.float64)
        if b.shape != (N_SHAPE_COEFFS,):
            raise ValueError(f"shape must have {N_SHAPE_COEFFS} coefficients, got {b.shape}")
        if not np.all(np.isfinite(b)):
            raise ValueError("shape contains non-finite coefficients")
        object.__setattr__(self, "betas", b)

    @classmethod
    def zeros(cls) -> "HandShape":
        return cls(np.zeros(N_SHAPE_COEFFS))


@dataclass(frozen=True)
class SkinningBlock:
    """Optional mesh data: rest vertices, per-vertex weights over the 16
    articulated joints, per-vertex shape basis, and triangle faces."""

    vertices: np.ndarray            # (N, 3)
    weights: np.ndarray             # (N, 16), rows sum to 1
    vertex_shape_basis: np.ndarray  # (10, N, 3)
    faces: np.ndarray               # (M, 3) int

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64)
        vb = np.asarray(self.vertex_shape_basis, dtype=np.float64)
        f = np.asarray(self.faces, dtype=np.int64)
        n = v.shape[0]
        if v.ndim != 2 or v.shape[1] != 3:
            raise ModelFormatError("skinning vertices must be N x 3")
        if w.shape != (n, N_ROTATIONS):
            raise ModelFormatError(f"skinning weights must be {n} x {N_ROTATIONS}")
        if vb.shape != (N_SHAPE_COEFFS, n, 3):
            raise ModelFormatError("vertex shape basis rank mismatch")
        if f.ndim != 2 or f.shape[1] != 3:
            raise ModelFormatError("faces must be M x 3")
        if f.size and (f.min() < 0 or f.max() >= n):
            raise ModelFormatError("face indices out of range")
        if np.any(w < -1e-12):
            raise ModelFormatError("skinning weights must be non-negative")
        row_sums = w.sum(axis=1)
        if np.any(np.abs(row_sums - 1.0) > 1e-6):
            raise ModelFormatError("skinning weight rows not normalized")
        for name, arr in (("vertices", v), ("weights", w), ("vertex_shape_basis", vb)):
            if not np.all(np.isfinite(arr)):
                raise ModelFormatError(f"skinning {name} contain non-finite values")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "vertex_shape_basis", vb)
        object.__setattr__(self, "faces", f)


@dataclass(frozen=True)
class HandModelParams:
    """Immutable hand model: rest skeleton, kinematic tree, shape basis, and
    an optional skinning block.  Safe to share across threads after load."""

    rest_joints: np.ndarray   # (21, 3) meters, mean shape
    parent: np.ndarray        # (21,) int, root (wrist) has parent -1
    articulated: np.ndarray   # (21,) bool, exactly 16 True
    shape_basis: np.ndarray   # (10, 21, 3) meters per unit beta
    skinning: SkinningBlock | None = None

    def __post_init__(self):
        rest = np.asarray(self.rest_joints, dtype=np.float64)
        parent = np.asarray(self.parent, dtype=np.int64)
        artic = np.asarray(self.articulated, dtype=bool)
        basis = np.asarray(self.shape_basis, dtype=np.float64)
        if rest.shape != (N_KEYPOINTS, 3):
            raise ModelFormatError(f"rest_joints must be {N_KEYPOINTS} x 3, got {rest.shape}")
        if parent.shape != (N_KEYPOINTS,):
            raise ModelFormatError("parent must list one index per keypoint")
        if artic.shape != (N_KEYPOINTS,):
            raise ModelFormatError("articulated must flag each keypoint")
        if basis.shape != (N_SHAPE_COEFFS, N_KEYPOINTS, 3):
            raise ModelFormatError("shape basis rank mismatch")
        if not np.all(np.isfinite(rest)) or not np.all(np.isfinite(basis)):
            raise ModelFormatError("model arrays contain non-finite values")
        if int(artic.sum()) != N_ROTATIONS:
            raise ModelFormatError(
                f"articulated mask must mark exactly {N_ROTATIONS} keypoints, got {int(artic.sum())}"
            )
        _check_tree(parent)
        if not artic[0]:
            raise ModelFormatError("wrist (index 0) must be articulated")
        object.__setattr__(self, "rest_joints", rest)
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "articulated", artic)
        object.__setattr__(self, "shape_basis", basis)

    @property
    def articulated_indices(self) -> np.ndarray:
        """Keypoint indices carrying the 16 rotations, in keypoint order."""
        return np.flatnonzero(self.articulated)


def _check_tree(parent: np.ndarray) -> None:
    """Validate that `parent` encodes a single-rooted acyclic tree with root 0."""
    n = parent.shape[0]
    roots = np.flatnonzero(parent < 0)
    if roots.size != 1 or roots[0] != 0:
        raise ModelFormatError("kinematic tree must have exactly one root at index 0")
    for j in range(n):
        if parent[j] >= n:
            raise ModelFormatError(f"parent index {parent[j]} out of range")
        seen = set()
        k = j
        while parent[k] >= 0:
            if k in seen:
                raise ModelFormatError("kinematic tree has cycle")
            seen.add(k)
            k = int(parent[k])


def topological_order(parent: np.ndarray) -> list[int]:
    """Keypoint indices ordered so every parent precedes its children."""
    parent = np.asarray(parent, dtype=np.int64)
    order: list[int] = []
    placed = np.zeros(parent.shape[0], dtype=bool)
    remaining = list(range(parent.shape[0]))
    while remaining:
        progressed = False
        rest = []
        for j in remaining:
            p = parent[j]
            if p < 0 or placed[p]:
                order.append(j)
                placed[j] = True
                progressed = True
            else:
                rest.append(j)
        if not progressed:
            raise ModelFormatError("kinematic tree has cycle")
        remaining = rest
    return order


def rodrigues(axis_angle: np.ndarray) -> np.ndarray:
    """Convert axis-angle vectors (..., 3) to rotation matrices (..., 3, 3).

    Uses the closed-form exponential map with a second-order Taylor branch for
    magnitudes below 1e-8, so the identity neighborhood is exact and free of
    division by zero.
    """
    aa = np.asarray(axis_angle, dtype=np.float64)
    if aa.shape[-1] != 3:
        raise ValueError("axis-angle vectors must have 3 components")
    theta = np.linalg.norm(aa, axis=-1)
    t2 = theta * theta
    small = theta < _SMALL_ANGLE
    safe_theta = np.where(small, 1.0, theta)
    sin_coeff = np.where(small, 1.0 - t2 / 6.0, np.sin(safe_theta) / safe_theta)
    cos_coeff = np.where(small, 0.5 - t2 / 24.0, (1.0 - np.cos(safe_theta)) / (safe_theta * safe_theta))

    k = np.zeros(aa.shape[:-1] + (3, 3))
    k[..., 0, 1] = -aa[..., 2]
    k[..., 0, 2] = aa[..., 1]
    k[..., 1, 0] = aa[..., 2]
    k[..., 1, 2] = -aa[..., 0]
    k[..., 2, 0] = -aa[..., 1]
    k[..., 2, 1] = aa[..., 0]

    eye = np.broadcast_to(np.eye(3), k.shape)
    return eye + sin_coeff[..., None, None] * k + cos_coeff[..., None, None] * (k @ k)


def so3_log(rotation: np.ndarray) -> np.ndarray:
    """Inverse of `rodrigues` for a single 3x3 rotation matrix.

    Returns an axis-angle vector with magnitude in [0, pi].  Goes through a
    quaternion so the extraction stays well-conditioned at every angle,
    including near pi where the skew part of R vanishes.
    """
    r = np.asarray(rotation, dtype=np.float64)
    if r.shape != (3, 3):
        raise ValueError("expected a single 3x3 rotation matrix")

    # branch on the largest of (trace, diagonal entries) for stability
    tr = r[0, 0] + r[1, 1] + r[2, 2]
    if tr > max(r[0, 0], r[1, 1], r[2, 2]):
        s = 2.0 * np.sqrt(max(tr + 1.0, 0.0))
        w = 0.25 * s
        v = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]]) / s
    elif r[0, 0] >= r[1, 1] and r[0, 0] >= r[2, 2]:
        s = 2.0 * np.sqrt(max(1.0 + r[0, 0] - r[1, 1] - r[2, 2], 0.0))
        w = (r[2, 1] - r[1, 2]) / s
        v = np.array([0.25 * s, (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s])
    elif r[1, 1] >= r[2, 2]:
        s = 2.0 * np.sqrt(max(1.0 + r[1, 1] - r[0, 0] - r[2, 2], 0.0))
        w = (r[0, 2] - r[2, 0]) / s
        v = np.array([(r[0, 1] + r[1, 0]) / s, 0.25 * s, (r[1, 2] + r[2, 1]) / s])
    else:
        s = 2.0 * np.sqrt(max(1.0 + r[2, 2] - r[0, 0] - r[1, 1], 0.0))
        w = (r[1, 0] - r[0, 1]) / s
        v = np.array([(r[0, 2] + r[2, 0]) / s, (r[1, 2] + r[2, 1]) / s, 0.25 * s])

    if w < 0.0:  # pick the quaternion hemisphere that gives angle <= pi
        w, v = -w, -v
    norm_v = np.linalg.norm(v)
    if norm_v < _SMALL_ANGLE:
        return 2.0 * v  # first-order: axis-angle ~ 2 * vector part
    theta = 2.0 * np.arctan2(norm_v, w)
    return theta * v / norm_v


def canonicalize_axis_angle(axis_angle: np.ndarray) -> np.ndarray:
    """Wrap axis-angle magnitudes into [0, pi], flipping the axis as needed."""
    aa = np.asarray(axis_angle, dtype=np.float64)
    theta = np.linalg.norm(aa, axis=-1, keepdims=True)
    wrapped = np.mod(theta, 2.0 * np.pi)
    over = wrapped > np.pi
    target = np.where(over, wrapped - 2.0 * np.pi, wrapped)  # signed angle in (-pi, pi]
    scale = np.where(theta > 0, target / np.where(theta > 0, theta, 1.0), 1.0)
    return aa * scale


def shaped_rest_joints(model: HandModelParams, shape: HandShape) -> np.ndarray:
    """Rest skeleton displaced by the linear shape basis: rest + sum_k beta_k basis_k."""
    return model.rest_joints + np.einsum("k,kjc->jc", shape.betas, model.shape_basis)


def forward_kinematics(model: HandModelParams, shape: HandShape, pose: HandPose) -> np.ndarray:
    """Pose the shaped skeleton and return the 21 keypoints, wrist-rooted.

    Each articulated joint's world rotation composes its ancestors' rotations;
    children rigidly follow parents, and fingertip sites follow their parent's
    world transform.  The wrist stays at its shaped rest position; global
    placement is the camera's job.
    """
    positions, _ = _forward_transforms(model, shape, pose)
    return positions


def _forward_transforms(model, shape, pose):
    """FK core: world positions (21, 3) and world rotations (21, 3, 3)."""
    rest = shaped_rest_joints(model, shape)
    local_rot = np.broadcast_to(np.eye(3), (N_KEYPOINTS, 3, 3)).copy()
    local_rot[model.articulated_indices] = rodrigues(pose.rotations)

    positions = np.zeros((N_KEYPOINTS, 3))
    world_rot = np.zeros((N_KEYPOINTS, 3, 3))
    for j in topological_order(model.parent):
        p = int(model.parent[j])
        if p < 0:
            world_rot[j] = local_rot[j]
            positions[j] = rest[j]
        else:
            world_rot[j] = world_rot[p] @ local_rot[j]
            positions[j] = world_rot[p] @ (rest[j] - rest[p]) + positions[p]
    return positions, world_rot


def skin_vertices(model: HandModelParams, shape: HandShape, pose: HandPose) -> np.ndarray:
    """Linear blend skinning of the model's mesh vertices, (N, 3) meters.

    Each vertex is the weight-blended application of the articulated joints'
    world transforms to its shaped rest position.  Requires a skinning block.
    """
    if model.skinning is None:
        raise ValueError("model lacks skinning block")
    skin = model.skinning
    rest = shaped_rest_joints(model, shape)
    positions, world_rot = _forward_transforms(model, shape, pose)

    verts = skin.vertices + np.einsum("k,kvc->vc", shape.betas, skin.vertex_shape_basis)
    idx = model.articulated_indices
    # Rigid map per articulated joint a: x -> R_a (x - rest_a) + pos_a
    rotated = np.einsum("aij,vj->avi", world_rot[idx], verts)                    # (16, N, 3)
    offsets = positions[idx] - np.einsum("aij,aj->ai", world_rot[idx], rest[idx])  # (16, 3)
    return np.einsum("va,avi->vi", skin.weights, rotated + offsets[:, None, :])


def bone_vectors(joints: np.ndarray, parent: np.ndarray) -> np.ndarray:
    """Per non-root keypoint, the vector child - parent, in tree order (20, 3)."""
    pts = np.asarray(joints, dtype=np.float64)
    parent = np.asarray(parent, dtype=np.int64)
    if pts.shape != (N_KEYPOINTS, 3):
        raise ValueError(f"expected {N_KEYPOINTS} x 3 joints, got {pts.shape}")
    children = np.flatnonzero(parent >= 0)
    return pts[children] - pts[parent[children]]


def load_model(path: str | Path) -> HandModelParams:
    """Load and validate a hand model file (see the schema in the README).

    The file is UTF-8 JSON with fields `version`, `rest_joints`, `parent`,
    `articulated`, `shape_basis`, and an optional `skinning` block.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"hand model file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    for key in ("version", "rest_joints", "parent", "articulated", "shape_basis"):
        if key not in doc:
            raise ModelFormatError(f"model file missing field '{key}'")
    if doc["version"] != MODEL_FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {doc['version']}")

    skinning = None
    if doc.get("skinning") is not None:
        sk = doc["skinning"]
        for key in ("vertices", "weights", "vertex_shape_basis", "faces"):
            if key not in sk:
                raise ModelFormatError(f"skinning block missing field '{key}'")
        skinning = SkinningBlock(
            vertices=np.asarray(sk["vertices"], dtype=np.float64),
            weights=np.asarray(sk["weights"], dtype=np.float64),
            vertex_shape_basis=np.asarray(sk["vertex_shape_basis"], dtype=np.float64),
            faces=np.asarray(sk["faces"], dtype=np.int64),
        )
    try:
        rest = np.asarray(doc["rest_joints"], dtype=np.float64)
        parent = np.asarray(doc["parent"], dtype=np.int64)
        artic = np.asarray(doc["articulated"], dtype=bool)
        basis = np.asarray(doc["shape_basis"], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model field: {exc}") from exc
    return HandModelParams(rest, parent, artic, basis, skinning)


def save_model(model: HandModelParams, path: str | Path) -> None:
    """Write a model back out in the documented file format."""
    doc: dict = {
        "version": MODEL_FORMAT_VERSION,
        "rest_joints": model.rest_joints.tolist(),
        "parent": model.parent.tolist(),
        "articulated": model.articulated.tolist(),
        "shape_basis": model.shape_basis.tolist(),
    }
    if model.skinning is not None:
        doc["skinning"] = {
            "vertices": model.skinning.vertices.tolist(),
            "weights": model.skinning.weights.tolist(),
            "vertex_shape_basis": model.skinning.vertex_shape_basis.tolist(),
            "faces": model.skinning.faces.tolist(),
        }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")
