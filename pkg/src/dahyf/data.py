"""Data ingestion and synthetic sequence generation.

Sequences are JSONL, one frame record per line.  An observed record is a
`FrameResult` dict (confidence null until the pipeline computes it); a
ground-truth record additionally carries the posed 3D joints and an
`is_outlier` flag naming the frames that were deliberately corrupted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .camera import WeakCamera, project_points, weak_to_full
from .confidence import cosine_confidence, normalize_pred, normalize_proj
from .geometry import PatchSpec, frame_to_patch_abs
from .hand_model import HandModelParams, HandPose, HandShape, forward_kinematics
from .tempfilter import FrameResult

FREIHAND_SPLITS = ("training", "evaluation")

# FreiHAND annotations already list wrist first and then thumb through pinky,
# proximal to tip, which is this package's canonical ordering.
FREIHAND_TO_CANONICAL = tuple(range(21))


@dataclass(frozen=True)
class HandSample:
    """One dataset sample: camera intrinsics, 3D joints, optional vertices."""

    intrinsics: np.ndarray       # (3, 3)
    joints3d: np.ndarray         # (21, 3) meters
    vertices: np.ndarray | None  # (V, 3) meters


def load_freihand_annotations(root: str | Path, split: str = "training") -> list[HandSample]:
    """Load FreiHAND-layout annotation arrays from a directory.

    Expects `{split}_K.json` and `{split}_xyz.json` (lists of 3x3 intrinsics
    and 21x3 joint arrays), plus optional `{split}_verts.json`.  Samples are
    remapped into canonical joint ordering and validated.
    """
    root = Path(root)
    if split not in FREIHAND_SPLITS:
        raise ValueError(f"split must be one of {FREIHAND_SPLITS}")
    k_path = root / f"{split}_K.json"
    xyz_path = root / f"{split}_xyz.json"
    if not k_path.exists() or not xyz_path.exists():
        raise FileNotFoundError(f"missing annotation files under {root}")
    k_list = json.loads(k_path.read_text(encoding="utf-8"))
    xyz_list = json.loads(xyz_path.read_text(encoding="utf-8"))
    verts_list = None
    verts_path = root / f"{split}_verts.json"
    if verts_path.exists():
        verts_list = json.loads(verts_path.read_text(encoding="utf-8"))

    if len(k_list) != len(xyz_list):
        raise ValueError("annotation length mismatch")
    if verts_list is not None and len(verts_list) != len(k_list):
        raise ValueError("annotation length mismatch")

    order = list(FREIHAND_TO_CANONICAL)
    samples = []
    for i, (k_raw, xyz_raw) in enumerate(zip(k_list, xyz_list)):
        intr = np.asarray(k_raw, dtype=np.float64)
        xyz = np.asarray(xyz_raw, dtype=np.float64)
        if intr.shape != (3, 3):
            raise ValueError(f"sample {i}: intrinsics must be 3x3")
        if xyz.shape != (21, 3):
            raise ValueError(f"sample {i}: joints must be 21x3")
        if abs(np.linalg.det(intr)) < 1e-9 or intr[0, 0] <= 0 or intr[1, 1] <= 0:
            raise ValueError(f"sample {i}: degenerate intrinsics")
        verts = None
        if verts_list is not None:
            verts = np.asarray(verts_list[i], dtype=np.float64)
            if verts.ndim != 2 or verts.shape[1] != 3:
                raise ValueError(f"sample {i}: vertices must be V x 3")
        samples.append(HandSample(intrinsics=intr, joints3d=xyz[order], vertices=verts))
    return samples


def write_jsonl(records, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


@dataclass(frozen=True)
class SynthSequence:
    gt: list[dict]
    observed: list[dict]
    outlier_indices: list[int]


MOTION_PRESETS = ("wave", "still")

_FRAME_W, _FRAME_H = 640, 480
_FOCAL = 800.0
_PATCH_SIZE = 200.0


def _wave_pose(phase: float) -> HandPose:
    """Smooth sinusoidal joint-angle curves: finger curls about x plus a
    gently swaying wrist."""
    rot = np.zeros((16, 3))
    rot[0] = [0.1 * np.sin(0.7 * phase), 0.15 * np.sin(0.5 * phase), 0.2 * np.sin(0.6 * phase)]
    for r in range(1, 16):
        rot[r, 0] = 0.35 + 0.25 * np.sin(phase + 0.4 * r)
        rot[r, 2] = 0.05 * np.sin(0.8 * phase + 0.2 * r)
    return HandPose(rot)


def _spec_at(phase: float) -> PatchSpec:
    ulx = 180.0 + 60.0 * np.sin(0.2 * phase)
    uly = 120.0 + 40.0 * np.cos(0.14 * phase)
    return PatchSpec(
        frame_w=_FRAME_W,
        frame_h=_FRAME_H,
        upper_left=(ulx, uly),
        patch_size=_PATCH_SIZE,
        focal=_FOCAL,
    )


def _weak_at(phase: float) -> WeakCamera:
    return WeakCamera(
        scale=4.0 + 0.4 * np.sin(0.5 * phase + 0.3),
        tx=0.02 * np.sin(phase / 3.0),
        ty=-0.1 + 0.02 * np.cos(phase / 3.0),
    )


def synth_sequence(
    model: HandModelParams,
    n_frames: int,
    motion: str = "wave",
    noise_px: float = 0.0,
    outlier_rate: float = 0.0,
    seed: int = 0,
) -> SynthSequence:
    """Generate a deterministic ground-truth sequence and a noisy observation.

    Ground truth follows smooth sinusoidal pose/camera trajectories with 2D
    joints obtained by projecting the posed skeleton into the moving crop.
    The observed variant adds seeded Gaussian noise to the 2D joints and, at
    `outlier_rate`, replaces whole frames with confidence-killing garbage
    (scrambled joints, randomized pose and camera).  Identical seeds yield
    bit-identical output.
    """
    if motion not in MOTION_PRESETS:
        raise ValueError(f"unknown motion preset {motion!r}; options: {MOTION_PRESETS}")
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    rng = np.random.default_rng(seed)
    shape = HandShape(0.2 * np.sin(1.0 + np.arange(10)))

    n_outliers = int(round(outlier_rate * n_frames))
    outliers: set[int] = set()
    if n_outliers > 0:
        if n_frames < 2:
            raise ValueError("outliers need at least 2 frames")
        # frame 0 stays clean so gating always has a donor
        outliers = set(rng.choice(np.arange(1, n_frames), size=min(n_outliers, n_frames - 1), replace=False).tolist())

    gt_records: list[dict] = []
    obs_records: list[dict] = []
    for t in range(n_frames):
        phase = 2.0 * np.pi * t / 120.0
        pose = _wave_pose(phase) if motion == "wave" else HandPose.zeros()
        spec = _spec_at(phase)
        weak = _weak_at(phase)
        joints3d = forward_kinematics(model, shape, pose)
        frame_uv = project_points(joints3d, weak_to_full(weak, spec))
        joints2d = frame_to_patch_abs(frame_uv, spec)

        gt_frame = FrameResult(
            frame_index=t, pose=pose, shape=shape, weak=weak,
            joints2d=joints2d, spec=spec, confidence=None,
        )
        gt_doc = gt_frame.to_dict()
        gt_doc["joints3d"] = joints3d.tolist()
        gt_doc["is_outlier"] = t in outliers
        gt_records.append(gt_doc)

        if t in outliers:
            obs_doc = _corrupt_frame(gt_frame, model, rng).to_dict()
        else:
            noisy = joints2d + (rng.normal(0.0, noise_px, size=joints2d.shape) if noise_px > 0 else 0.0)
            obs_doc = FrameResult(
                frame_index=t, pose=pose, shape=shape, weak=weak,
                joints2d=noisy, spec=spec, confidence=None,
            ).to_dict()
        obs_records.append(obs_doc)

    return SynthSequence(gt=gt_records, observed=obs_records, outlier_indices=sorted(outliers))


def _corrupt_frame(gt_frame: FrameResult, model: HandModelParams, rng) -> FrameResult:
    """Build a garbage frame whose detected/reprojected joints decorrelate.

    Resamples (bounded) until the would-be confidence drops below 0.3, so
    seeded outliers are confidence-killing by construction.
    """
    spec = gt_frame.spec
    for _ in range(50):
        scrambled = rng.permutation(gt_frame.joints2d) + rng.normal(0.0, 40.0, size=(21, 2))
        pose = HandPose(rng.normal(0.0, 0.7, size=(16, 3)))
        weak = WeakCamera(
            scale=float(rng.uniform(2.0, 7.0)),
            tx=float(rng.uniform(-0.3, 0.3)),
            ty=float(rng.uniform(-0.4, 0.2)),
        )
        try:
            joints3d = forward_kinematics(model, gt_frame.shape, pose)
            frame_uv = project_points(joints3d, weak_to_full(weak, spec))
            conf = cosine_confidence(
                normalize_pred(scrambled, spec), normalize_proj(frame_uv, spec)
            )
        except ValueError:
            continue
        if conf < 0.3:
            return FrameResult(
                frame_index=gt_frame.frame_index, pose=pose, shape=gt_frame.shape,
                weak=weak, joints2d=scrambled, spec=spec, confidence=None,
            )
    raise RuntimeError("failed to synthesize a low-confidence outlier frame")
