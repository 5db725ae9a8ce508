"""Video post-processing: confidence-gated replacement of unreliable frames
and causal temporal smoothing of pose, shape, and camera parameters.

Gating first, smoothing second.  Gating replaces a low-confidence frame's
pose/shape/camera with those of the most recent high-confidence frame
(within a bounded hold), leaving the raw 2D observations and the confidence
value untouched.  Smoothing then runs per scalar channel over the gated
sequence; pose axis-angles are canonicalized to [0, pi] magnitude first so
the filter never sees 2-pi representation jumps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .camera import WeakCamera
from .geometry import PatchSpec
from .hand_model import HandPose, HandShape, canonicalize_axis_angle

FRAME_FORMAT_VERSION = 1

SMOOTHING_MODES = ("off", "exponential", "one_euro")


@dataclass(frozen=True)
class SmoothingConfig:
    mode: str = "off"
    alpha: float = 0.5            # exponential
    min_cutoff: float = 1.0       # one euro
    beta: float = 0.0
    d_cutoff: float = 1.0

    def __post_init__(self):
        if self.mode not in SMOOTHING_MODES:
            raise ValueError(f"smoothing mode must be one of {SMOOTHING_MODES}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if self.min_cutoff <= 0 or self.d_cutoff <= 0:
            raise ValueError("cutoff frequencies must be positive")


@dataclass(frozen=True)
class FilterConfig:
    threshold: float = 0.5
    smoothing: SmoothingConfig = SmoothingConfig()
    max_hold_frames: int = 30

    def __post_init__(self):
        # -1 is allowed: it turns gating into the identity
        if not -1.0 <= self.threshold < 1.0:
            raise ValueError("threshold must lie in [-1, 1)")
        if self.max_hold_frames < 1:
            raise ValueError("max_hold_frames must be >= 1")


@dataclass(frozen=True)
class FrameResult:
    """One frame's motion-capture record flowing through the filter."""

    frame_index: int
    pose: HandPose
    shape: HandShape
    weak: WeakCamera
    joints2d: np.ndarray  # (21, 2) patch pixels
    spec: PatchSpec
    confidence: float | None = None
    unreliable: bool = False
    replaced_from: int | None = None

    def __post_init__(self):
        pts = np.asarray(self.joints2d, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"joints2d must be (K, 2), got {pts.shape}")
        if self.confidence is not None and not -1.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [-1, 1]")
        object.__setattr__(self, "joints2d", pts)

    def to_dict(self) -> dict:
        return {
            "format_version": FRAME_FORMAT_VERSION,
            "frame_index": self.frame_index,
            "pose": self.pose.rotations.tolist(),
            "shape": self.shape.betas.tolist(),
            "weak": self.weak.to_dict(),
            "joints2d": self.joints2d.tolist(),
            "spec": self.spec.to_dict(),
            "confidence": self.confidence,
            "unreliable": self.unreliable,
            "replaced_from": self.replaced_from,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FrameResult":
        return cls(
            frame_index=int(doc["frame_index"]),
            pose=HandPose(np.asarray(doc["pose"], dtype=np.float64)),
            shape=HandShape(np.asarray(doc["shape"], dtype=np.float64)),
            weak=WeakCamera.from_dict(doc["weak"]),
            joints2d=np.asarray(doc["joints2d"], dtype=np.float64),
            spec=PatchSpec.from_dict(doc["spec"]),
            confidence=None if doc.get("confidence") is None else float(doc["confidence"]),
            unreliable=bool(doc.get("unreliable", False)),
            replaced_from=doc.get("replaced_from"),
        )


def _check_sequence(frames: Sequence[FrameResult]) -> None:
    if len(frames) == 0:
        raise ValueError("sequence must contain at least one frame")
    indices = [f.frame_index for f in frames]
    if any(b <= a for a, b in zip(indices, indices[1:])):
        raise ValueError("frame indices must be strictly increasing")


def gate_sequence(frames: Sequence[FrameResult], cfg: FilterConfig) -> list[FrameResult]:
    """Replace low-confidence frames' pose/shape/camera with the most recent
    high-confidence frame's, within `max_hold_frames`.

    Frames with no eligible donor are marked unreliable and passed through
    unmodified.  Confidence values and 2D observations are never rewritten,
    which makes the operation idempotent.
    """
    _check_sequence(frames)
    out: list[FrameResult] = []
    donor: FrameResult | None = None
    for frame in frames:
        if frame.confidence is None:
            raise ValueError(f"frame {frame.frame_index} has no confidence; compute it before gating")
        if frame.confidence >= cfg.threshold:
            donor = frame
            out.append(frame)
            continue
        if donor is not None and frame.frame_index - donor.frame_index <= cfg.max_hold_frames:
            out.append(
                replace(
                    frame,
                    pose=donor.pose,
                    shape=donor.shape,
                    weak=donor.weak,
                    unreliable=False,
                    replaced_from=donor.frame_index,
                )
            )
        else:
            out.append(replace(frame, unreliable=True))
    return out


def _exp_alpha(cutoff, dt):
    r = 2.0 * math.pi * cutoff * dt
    return r / (r + 1.0)


class _OneEuro:
    """Vectorized one-euro filter over a channel vector; time in frame units."""

    def __init__(self, cfg: SmoothingConfig, t0: float, x0: np.ndarray):
        self.cfg = cfg
        self.t_prev = t0
        self.x_prev = x0
        self.dx_prev = np.zeros_like(x0)

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        dt = t - self.t_prev
        a_d = _exp_alpha(self.cfg.d_cutoff, dt)
        dx = (x - self.x_prev) / dt
        dx_hat = a_d * dx + (1.0 - a_d) * self.dx_prev
        cutoff = self.cfg.min_cutoff + self.cfg.beta * np.abs(dx_hat)
        a = _exp_alpha(cutoff, dt)
        x_hat = a * x + (1.0 - a) * self.x_prev
        self.t_prev = t
        self.x_prev = x_hat
        self.dx_prev = dx_hat
        return x_hat


def _state_vector(frame: FrameResult) -> np.ndarray:
    pose = canonicalize_axis_angle(frame.pose.rotations).reshape(-1)
    weak = np.array([frame.weak.scale, frame.weak.tx, frame.weak.ty])
    return np.concatenate([pose, frame.shape.betas, weak])


def _with_state(frame: FrameResult, state: np.ndarray) -> FrameResult:
    pose = HandPose(state[:48].reshape(16, 3))
    shape = HandShape(state[48:58])
    weak = WeakCamera(scale=float(state[58]), tx=float(state[59]), ty=float(state[60]))
    return replace(frame, pose=pose, shape=shape, weak=weak)


def smooth_sequence(frames: Sequence[FrameResult], cfg: FilterConfig) -> list[FrameResult]:
    """Causal per-channel smoothing of pose, shape, and weak camera.

    The first frame passes through (after pose canonicalization); later
    frames follow the configured exponential or one-euro recurrence.  2D
    observations and confidences are untouched.
    """
    _check_sequence(frames)
    smoothing = cfg.smoothing
    if smoothing.mode == "off":
        return list(frames)

    out = []
    x0 = _state_vector(frames[0])
    out.append(_with_state(frames[0], x0))
    if smoothing.mode == "exponential":
        y = x0
        for frame in frames[1:]:
            x = _state_vector(frame)
            y = smoothing.alpha * x + (1.0 - smoothing.alpha) * y
            out.append(_with_state(frame, y))
    else:  # one_euro
        filt = _OneEuro(smoothing, float(frames[0].frame_index), x0)
        for frame in frames[1:]:
            y = filt(float(frame.frame_index), _state_vector(frame))
            out.append(_with_state(frame, y))
    return out
