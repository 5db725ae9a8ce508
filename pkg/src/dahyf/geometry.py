"""Coordinate-frame bookkeeping between feature map, hand patch, and full
frame, plus local and global direction maps.

Three frames are used throughout:

* feature coords: integer pixel indices of the s_f x s_f feature grid;
* patch coords: pixels of the resized s_p x s_p network input;
* frame coords: pixels of the full frame, either with the origin at the
  top-left corner ("absolute") or at the frame center ("centered").

The direction of a frame pixel is its centered coordinate divided by the
focal length, i.e. the viewing-ray direction in the camera frame.  All maps
are pure affine geometry; crops may extend past the frame edges.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

SPEC_FORMAT_VERSION = 1


@dataclass(frozen=True)
class PatchSpec:
    """Square hand crop tied to its full frame and camera.

    `upper_left` is the crop's top-left corner in absolute frame pixels,
    `patch_size` the crop side length before resizing to `net_size`.
    `focal` may be None, in which case the sqrt(H^2 + W^2) fallback applies.
    `flipped` records that the patch content was mirrored (left-hand
    handling), so direction maps sample mirrored patch columns.
    """

    frame_w: int
    frame_h: int
    upper_left: tuple[float, float]
    patch_size: float
    net_size: int = 224
    feat_size: int = 56
    focal: float | None = None
    handedness: str = "right"
    flipped: bool = False

    def __post_init__(self):
        if self.frame_w <= 0 or self.frame_h <= 0:
            raise ValueError("frame dimensions must be positive")
        if self.patch_size <= 0:
            raise ValueError("patch_size must be positive")
        if self.net_size <= 0 or self.feat_size <= 0:
            raise ValueError("net_size and feat_size must be positive")
        if self.focal is not None and self.focal <= 0:
            raise ValueError("focal must be positive when given")
        if self.handedness not in ("left", "right"):
            raise ValueError(f"handedness must be 'left' or 'right', got {self.handedness!r}")
        object.__setattr__(self, "upper_left", (float(self.upper_left[0]), float(self.upper_left[1])))

    @property
    def focal_or_default(self) -> float:
        return float(self.focal) if self.focal is not None else default_focal(self.frame_w, self.frame_h)

    @property
    def center(self) -> tuple[float, float]:
        """Patch center in absolute frame pixels."""
        half = self.patch_size / 2.0
        return (self.upper_left[0] + half, self.upper_left[1] + half)

    def to_dict(self) -> dict:
        return {
            "format_version": SPEC_FORMAT_VERSION,
            "frame_w": self.frame_w,
            "frame_h": self.frame_h,
            "upper_left": [self.upper_left[0], self.upper_left[1]],
            "patch_size": self.patch_size,
            "net_size": self.net_size,
            "feat_size": self.feat_size,
            "focal": self.focal,
            "handedness": self.handedness,
            "flipped": self.flipped,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PatchSpec":
        return cls(
            frame_w=int(doc["frame_w"]),
            frame_h=int(doc["frame_h"]),
            upper_left=(float(doc["upper_left"][0]), float(doc["upper_left"][1])),
            patch_size=float(doc["patch_size"]),
            net_size=int(doc.get("net_size", 224)),
            feat_size=int(doc.get("feat_size", 56)),
            focal=None if doc.get("focal") is None else float(doc["focal"]),
            handedness=doc.get("handedness", "right"),
            flipped=bool(doc.get("flipped", False)),
        )


@dataclass(frozen=True)
class DirectionMap:
    """Dense per-pixel direction planes, shape (channels, height, width).

    Channels alternate x-direction / y-direction; all x-planes are identical,
    as are all y-planes.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3 or v.shape[0] % 2 != 0:
            raise ValueError("direction map must be (even channels, H, W)")
        object.__setattr__(self, "values", v)

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]


def default_focal(frame_w: float, frame_h: float) -> float:
    """Focal-length fallback sqrt(W^2 + H^2) for frames with unknown intrinsics."""
    if frame_w <= 0 or frame_h <= 0:
        raise ValueError("frame dimensions must be positive")
    return float(np.hypot(frame_w, frame_h))


def feat_to_patch(p_f: np.ndarray, spec: PatchSpec) -> np.ndarray:
    """Map feature-grid coordinates to patch pixels: p * sc_p + sc_p / 2.

    The half-cell offset centers each feature pixel in its receptive cell.
    """
    sc_p = spec.net_size / spec.feat_size
    return np.asarray(p_f, dtype=np.float64) * sc_p + sc_p / 2.0


def patch_to_frame(p_l: np.ndarray, spec: PatchSpec) -> np.ndarray:
    """Map patch pixels to centered frame coords: p * sc_o + P_ulc - O."""
    sc_o = spec.patch_size / spec.net_size
    origin = np.array([spec.frame_w / 2.0, spec.frame_h / 2.0])
    return np.asarray(p_l, dtype=np.float64) * sc_o + np.asarray(spec.upper_left) - origin


def patch_to_frame_abs(p_l: np.ndarray, spec: PatchSpec) -> np.ndarray:
    """Patch pixels to absolute (top-left origin) frame pixels."""
    sc_o = spec.patch_size / spec.net_size
    return np.asarray(p_l, dtype=np.float64) * sc_o + np.asarray(spec.upper_left)


def frame_to_patch_abs(p_g: np.ndarray, spec: PatchSpec) -> np.ndarray:
    """Absolute frame pixels to patch pixels (inverse of `patch_to_frame_abs`)."""
    sc_o = spec.patch_size / spec.net_size
    return (np.asarray(p_g, dtype=np.float64) - np.asarray(spec.upper_left)) / sc_o


def frame_to_direction(p_g: np.ndarray, focal: float) -> np.ndarray:
    """Normalize centered frame coords into viewing-ray directions: p / f."""
    if focal <= 0:
        raise ValueError("focal must be positive")
    return np.asarray(p_g, dtype=np.float64) / focal


def _replicate_planes(x_plane: np.ndarray, y_plane: np.ndarray, channels: int) -> np.ndarray:
    if channels <= 0 or channels % 2 != 0:
        raise ValueError("channel count must be a positive even number")
    out = np.empty((channels,) + x_plane.shape)
    out[0::2] = x_plane
    out[1::2] = y_plane
    return out


def local_direction_map(feat_size: int, channels: int = 2) -> DirectionMap:
    """Raw feature-grid index planes: x-plane holds the column index, y-plane
    the row index, origin at the upper-left corner, replicated to `channels`.

    Identical for every crop of a given feature size, which is exactly why it
    cannot disambiguate where the hand sits in the frame.
    """
    if feat_size <= 0:
        raise ValueError("feat_size must be positive")
    cols, rows = np.meshgrid(np.arange(feat_size, dtype=np.float64),
                             np.arange(feat_size, dtype=np.float64))
    return DirectionMap(_replicate_planes(cols, rows, channels))


def global_direction_map(spec: PatchSpec, channels: int = 2) -> DirectionMap:
    """Viewing-ray direction planes for every feature pixel of a crop.

    Composes the feature -> patch -> frame chain and divides by the focal
    length.  For flipped patches the x lookup runs over mirrored patch
    columns so the map stays aligned with the mirrored image content.
    """
    f = spec.focal_or_default
    idx = np.arange(spec.feat_size, dtype=np.float64)
    px = feat_to_patch(idx, spec)  # same affine map on either axis
    py = px
    if spec.flipped:
        px = (spec.net_size - 1) - px

    sc_o = spec.patch_size / spec.net_size
    gx = px * sc_o + spec.upper_left[0] - spec.frame_w / 2.0
    gy = py * sc_o + spec.upper_left[1] - spec.frame_h / 2.0

    x_plane = np.tile(gx / f, (spec.feat_size, 1))
    y_plane = np.tile((gy / f)[:, None], (1, spec.feat_size))
    return DirectionMap(_replicate_planes(x_plane, y_plane, channels))


def mirror_joints_x(joints: np.ndarray, net_size: int) -> np.ndarray:
    """Mirror pixel-indexed x-coordinates about the patch center: x' = s_p - 1 - x."""
    pts = np.array(joints, dtype=np.float64, copy=True)
    pts[..., 0] = (net_size - 1) - pts[..., 0]
    return pts


def flip_left_patch(spec: PatchSpec, joints_2d: np.ndarray) -> tuple[PatchSpec, np.ndarray]:
    """Mirror a left-hand patch into right-hand convention.

    Joint x-coordinates are mirrored about the patch center and the returned
    spec records the flip so direction maps and frame-space projections stay
    consistent.  Raises on right-hand specs; flipping is a one-way move into
    the canonical right-hand space.
    """
    if spec.handedness != "left":
        raise ValueError("flip_left_patch requires a left-hand spec")
    flipped_spec = replace(spec, handedness="right", flipped=not spec.flipped)
    return flipped_spec, mirror_joints_x(joints_2d, spec.net_size)
