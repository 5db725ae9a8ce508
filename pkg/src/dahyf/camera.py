"""Weak-perspective camera head semantics and full-perspective projection.

The regressor's camera head predicts (scale, tx, ty) relative to the crop.
Converting to a full-perspective camera in the frame coordinate system uses
the standard crop-aware construction: depth from the inverse of the on-screen
scale, and x/y translation from the crop center offset plus the head's own
translation, both in normalized patch units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import PatchSpec

MIN_DEPTH = 1e-6


@dataclass(frozen=True)
class WeakCamera:
    """Weak-perspective parameters (scale, tx, ty) in normalized patch units."""

    scale: float
    tx: float
    ty: float

    def __post_init__(self):
        if not np.isfinite([self.scale, self.tx, self.ty]).all():
            raise ValueError("weak camera parameters must be finite")
        if self.scale <= 0:
            raise ValueError("weak camera scale must be positive")

    def to_dict(self) -> dict:
        return {"scale": self.scale, "tx": self.tx, "ty": self.ty}

    @classmethod
    def from_dict(cls, doc: dict) -> "WeakCamera":
        return cls(float(doc["scale"]), float(doc["tx"]), float(doc["ty"]))


@dataclass(frozen=True)
class FullCamera:
    """Pinhole camera: focal (pixels), principal point at the frame center,
    and a camera-frame translation applied to the wrist-rooted hand."""

    focal: float
    principal: tuple[float, float]
    translation: np.ndarray  # (3,) meters

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=np.float64)
        if t.shape != (3,):
            raise ValueError("translation must be a 3-vector")
        if self.focal <= 0:
            raise ValueError("focal must be positive")
        if t[2] <= 0:
            raise ValueError("camera translation must place the hand in front (T_z > 0)")
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "principal", (float(self.principal[0]), float(self.principal[1])))


def weak_to_full(weak: WeakCamera, spec: PatchSpec) -> FullCamera:
    """Lift a crop-relative weak camera to a frame-level perspective camera.

    T_z = 2f / (s * s_i); T_x and T_y pick up the crop center's offset from
    the frame center, scaled by the same factor, plus the head's translation.
    """
    if spec.patch_size <= 0:
        raise ValueError("patch_size must be positive")
    f = spec.focal_or_default
    cx, cy = spec.center
    ox, oy = spec.frame_w / 2.0, spec.frame_h / 2.0
    denom = weak.scale * spec.patch_size
    tz = 2.0 * f / denom
    tx = weak.tx + 2.0 * (cx - ox) / denom
    ty = weak.ty + 2.0 * (cy - oy) / denom
    return FullCamera(focal=f, principal=(ox, oy), translation=np.array([tx, ty, tz]))


def project_points(points: np.ndarray, cam: FullCamera) -> np.ndarray:
    """Pinhole projection of camera-frame points to absolute frame pixels.

    u = f (X + T_x) / (Z + T_z) + O_x, and likewise for v.  Points at or
    behind the camera are a hard error: they signal upstream divergence.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected (N, 3) points, got {pts.shape}")
    shifted = pts + cam.translation
    depth = shifted[:, 2]
    if np.any(depth <= MIN_DEPTH):
        raise ValueError("point at or behind camera (depth <= 1e-6)")
    uv = cam.focal * shifted[:, :2] / depth[:, None]
    return uv + np.asarray(cam.principal)
