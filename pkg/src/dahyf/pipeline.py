"""Pipeline composition: per-frame decode -> FK -> projection -> confidence,
then sequence-level gating and smoothing, with metrics against ground truth.

The per-frame stages are pure and frame-parallelizable; gating and smoothing
are sequential per sequence.  Output ordering always matches input ordering.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import toy
from .arrayio import read_coord_array
from .camera import project_points, weak_to_full
from .codec import CodecConfig, decode_soft_argmax
from .confidence import cosine_confidence, normalize_pred, normalize_proj
from .data import read_jsonl, write_jsonl
from .geometry import frame_to_patch_abs
from .hand_model import HandModelParams, forward_kinematics, load_model
from .metrics import epe_2d, joint_errors, pck_curve
from .tempfilter import FilterConfig, FrameResult, SmoothingConfig, gate_sequence, smooth_sequence

CONFIG_FORMAT_VERSION = 1
REPORT_FORMAT_VERSION = 1

PCK_THRESHOLDS_MM = tuple(float(t) for t in range(0, 55, 5))

SEED_ENV_VAR = "DAHYF_SEED"


@dataclass(frozen=True)
class PipelineConfig:
    codec: CodecConfig = CodecConfig()
    filter: FilterConfig = FilterConfig()
    model_path: str | None = None          # None -> bundled toy model
    focal_policy: str = "explicit"         # or "sqrt_fallback"
    pe_octaves: int = 4
    pooling: str = "mean"
    negative_target: float = -1.0
    seed: int = 0

    def __post_init__(self):
        if self.focal_policy not in ("explicit", "sqrt_fallback"):
            raise ValueError("focal_policy must be 'explicit' or 'sqrt_fallback'")
        if self.pooling not in ("mean", "max"):
            raise ValueError("pooling must be 'mean' or 'max'")
        if self.pe_octaves < 1:
            raise ValueError("pe_octaves must be >= 1")

    def to_dict(self) -> dict:
        return {
            "format_version": CONFIG_FORMAT_VERSION,
            "codec": self.codec.to_dict(),
            "filter": {
                "threshold": self.filter.threshold,
                "max_hold_frames": self.filter.max_hold_frames,
                "smoothing": {
                    "mode": self.filter.smoothing.mode,
                    "alpha": self.filter.smoothing.alpha,
                    "min_cutoff": self.filter.smoothing.min_cutoff,
                    "beta": self.filter.smoothing.beta,
                    "d_cutoff": self.filter.smoothing.d_cutoff,
                },
            },
            "model_path": self.model_path,
            "focal_policy": self.focal_policy,
            "pe_octaves": self.pe_octaves,
            "pooling": self.pooling,
            "negative_target": self.negative_target,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        filt = doc.get("filter", {})
        smooth = filt.get("smoothing", {})
        return cls(
            codec=CodecConfig.from_dict(doc.get("codec", {})),
            filter=FilterConfig(
                threshold=float(filt.get("threshold", 0.5)),
                max_hold_frames=int(filt.get("max_hold_frames", 30)),
                smoothing=SmoothingConfig(
                    mode=smooth.get("mode", "off"),
                    alpha=float(smooth.get("alpha", 0.5)),
                    min_cutoff=float(smooth.get("min_cutoff", 1.0)),
                    beta=float(smooth.get("beta", 0.0)),
                    d_cutoff=float(smooth.get("d_cutoff", 1.0)),
                ),
            ),
            model_path=doc.get("model_path"),
            focal_policy=doc.get("focal_policy", "explicit"),
            pe_octaves=int(doc.get("pe_octaves", 4)),
            pooling=doc.get("pooling", "mean"),
            negative_target=float(doc.get("negative_target", -1.0)),
            seed=int(doc.get("seed", 0)),
        )


def load_config(path: str | Path) -> PipelineConfig:
    return PipelineConfig.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_config(config: PipelineConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n", encoding="utf-8")


def effective_seed(config: PipelineConfig) -> int:
    """Config seed, overridable through the DAHYF_SEED environment variable."""
    env = os.environ.get(SEED_ENV_VAR)
    return int(env) if env is not None else config.seed


def _resolve_model(config: PipelineConfig) -> HandModelParams:
    if config.model_path is None:
        return load_model(toy.bundled_model_path())
    return load_model(config.model_path)


def _apply_focal_policy(frame: FrameResult, config: PipelineConfig) -> FrameResult:
    """Resolve the focal policy by rewriting the frame's spec.

    'sqrt_fallback' drops any explicit focal so every downstream consumer
    picks up the sqrt(W^2 + H^2) default; 'explicit' demands one.
    """
    spec = frame.spec
    if config.focal_policy == "sqrt_fallback":
        if spec.focal is None:
            return frame
        return replace(frame, spec=replace(spec, focal=None))
    if spec.focal is None:
        raise ValueError("focal_policy 'explicit' requires a focal in the spec")
    return frame


def _reprojected_patch_joints(frame: FrameResult, model: HandModelParams) -> tuple[np.ndarray, np.ndarray]:
    """FK joints (21, 3) and their patch-space projections (21, 2)."""
    joints3d = forward_kinematics(model, frame.shape, frame.pose)
    frame_uv = project_points(joints3d, weak_to_full(frame.weak, frame.spec))
    return joints3d, frame_to_patch_abs(frame_uv, frame.spec)


def run_pipeline(
    config: PipelineConfig,
    in_path: str | Path,
    out_path: str | Path,
    report_path: str | Path | None = None,
    gt_path: str | Path | None = None,
) -> dict:
    """Run decode/FK/project/confidence, gate, smooth; write results + report.

    Every input frame produces exactly one output line, in order.  Errors in
    any stage are re-raised with the offending frame index.
    """
    model = _resolve_model(config)
    raw_docs = read_jsonl(in_path)
    if not raw_docs:
        raise ValueError(f"no frames in {in_path}")

    frames: list[FrameResult] = []
    pre_filter: list[tuple[np.ndarray, np.ndarray]] = []  # (joints3d, reproj patch 2d) per raw frame
    for doc in raw_docs:
        frame = FrameResult.from_dict(doc)
        try:
            frame = _apply_focal_policy(frame, config)
            if doc.get("logits_file"):
                logits = read_coord_array(Path(in_path).parent / doc["logits_file"])
                frame = replace(frame, joints2d=decode_soft_argmax(logits, config.codec))
            joints3d, reproj = _reprojected_patch_joints(frame, model)
            conf = cosine_confidence(
                normalize_pred(frame.joints2d, frame.spec),
                normalize_proj(project_points(joints3d, weak_to_full(frame.weak, frame.spec)), frame.spec),
            )
        except (ValueError, OSError) as exc:
            raise RuntimeError(f"frame {frame.frame_index}: {exc}") from exc
        frames.append(replace(frame, confidence=conf))
        pre_filter.append((joints3d, reproj))

    gated = gate_sequence(frames, config.filter)
    smoothed = smooth_sequence(gated, config.filter)

    out_docs = []
    post_filter = []
    for frame in smoothed:
        joints3d, reproj = _reprojected_patch_joints(frame, model)
        post_filter.append((joints3d, reproj))
        doc = frame.to_dict()
        doc["joints3d"] = joints3d.tolist()
        out_docs.append(doc)
    write_jsonl(out_docs, out_path)

    report = _build_report(config, frames, smoothed, pre_filter, post_filter, gt_path)
    if report_path is not None:
        Path(report_path).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    return report


def _build_report(config, raw_frames, out_frames, pre_filter, post_filter, gt_path) -> dict:
    confidences = [f.confidence for f in raw_frames]
    report = {
        "format_version": REPORT_FORMAT_VERSION,
        "n_frames": len(raw_frames),
        "threshold": config.filter.threshold,
        "replaced_frames": [f.frame_index for f in out_frames if f.replaced_from is not None],
        "unreliable_frames": [f.frame_index for f in out_frames if f.unreliable],
        "confidence": {
            "min": min(confidences),
            "mean": sum(confidences) / len(confidences),
        },
    }
    if gt_path is None:
        return report

    gt_by_index = {doc["frame_index"]: doc for doc in read_jsonl(gt_path)}
    mpjpe, pa_mpjpe = [], []
    epe_obs, epe_pre, epe_post = [], [], []
    pred3d, gt3d = [], []
    for raw, out, (_, reproj_pre), (joints3d_post, reproj_post) in zip(
        raw_frames, out_frames, pre_filter, post_filter
    ):
        gt_doc = gt_by_index.get(raw.frame_index)
        if gt_doc is None:
            continue
        gt_joints3d = np.asarray(gt_doc["joints3d"], dtype=np.float64)
        gt_joints2d = np.asarray(gt_doc["joints2d"], dtype=np.float64)
        errs = joint_errors(joints3d_post, gt_joints3d)
        mpjpe.append(errs["mpjpe"])
        pa_mpjpe.append(errs["pa_mpjpe"])
        epe_obs.append(epe_2d(raw.joints2d, gt_joints2d))
        epe_pre.append(epe_2d(reproj_pre, gt_joints2d))
        epe_post.append(epe_2d(reproj_post, gt_joints2d))
        pred3d.append(joints3d_post)
        gt3d.append(gt_joints3d)
    if pred3d:
        report["metrics"] = {
            "mpjpe_mm": float(np.mean(mpjpe)),
            "pa_mpjpe_mm": float(np.mean(pa_mpjpe)),
            "epe_observed_px": float(np.mean(epe_obs)),
            "epe_reproj_pre_px": float(np.mean(epe_pre)),
            "epe_reproj_post_px": float(np.mean(epe_post)),
            "pck": pck_curve(pred3d, gt3d, np.array(PCK_THRESHOLDS_MM)),
        }
    return report
