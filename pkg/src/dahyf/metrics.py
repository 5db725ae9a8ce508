"""Evaluation metrics: similarity Procrustes alignment, MPJPE / PA-MPJPE /
PA-MPVPE, 2D endpoint error, F-score at distance thresholds, and PCK curves.

Points are in meters; every reported distance is converted to millimeters
(2D errors stay in pixels).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

MM_PER_M = 1000.0


@dataclass(frozen=True)
class AlignmentResult:
    """Similarity transform p -> scale * rotation @ p + translation and the
    transformed points."""

    rotation: np.ndarray     # (3, 3), det +1
    scale: float
    translation: np.ndarray  # (3,)
    aligned_points: np.ndarray


def procrustes_align(pred: np.ndarray, gt: np.ndarray) -> AlignmentResult:
    """Least-squares similarity alignment of pred onto gt, reflections excluded.

    Solves min over (s, R, t) of sum ||s R p_i + t - g_i||^2 via the SVD of
    the centered cross-covariance, forcing det(R) = +1 by flipping the
    smallest singular direction when needed: a mirrored hand must not align.
    """
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape or p.ndim != 2 or p.shape[1] != 3:
        raise ValueError("point sets must share shape (N, 3)")
    if p.shape[0] < 3:
        raise ValueError("alignment needs at least 3 points")

    mu_p = p.mean(axis=0)
    mu_g = g.mean(axis=0)
    pc = p - mu_p
    gc = g - mu_g
    var_p = (pc**2).sum() / p.shape[0]
    if var_p < 1e-18:
        raise ValueError("degenerate point set: zero spread")

    cov = pc.T @ gc / p.shape[0]
    u, s, vt = np.linalg.svd(cov)
    if np.count_nonzero(s > 1e-12 * max(s[0], 1e-300)) < 2:
        raise ValueError("degenerate point set: rank < 2")
    sign = np.ones(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        sign[-1] = -1.0
    rotation = (u * sign) @ vt
    rotation = rotation.T  # maps pred frame into gt frame
    scale = float((s * sign).sum() / var_p)
    translation = mu_g - scale * rotation @ mu_p
    aligned = scale * p @ rotation.T + translation
    return AlignmentResult(rotation=rotation, scale=scale, translation=translation, aligned_points=aligned)


def joint_errors(pred: np.ndarray, gt: np.ndarray) -> dict:
    """Mean per-joint position error in mm, raw and Procrustes-aligned."""
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise ValueError("joint sets must share shape")
    mpjpe = float(np.linalg.norm(p - g, axis=-1).mean()) * MM_PER_M
    aligned = procrustes_align(p, g).aligned_points
    pa_mpjpe = float(np.linalg.norm(aligned - g, axis=-1).mean()) * MM_PER_M
    return {"mpjpe": mpjpe, "pa_mpjpe": pa_mpjpe}


def vertex_errors(pred: np.ndarray, gt: np.ndarray) -> dict:
    """Mean per-vertex error in mm after Procrustes alignment (PA-MPVPE)."""
    aligned = procrustes_align(pred, gt).aligned_points
    g = np.asarray(gt, dtype=np.float64)
    return {"pa_mpvpe": float(np.linalg.norm(aligned - g, axis=-1).mean()) * MM_PER_M}


def epe_2d(pred: np.ndarray, gt: np.ndarray) -> float:
    """Average 2D endpoint error in pixels."""
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise ValueError("keypoint sets must share shape")
    return float(np.linalg.norm(p - g, axis=-1).mean())


def f_score(
    pred_vertices: np.ndarray,
    gt_vertices: np.ndarray,
    threshold_mm: float,
    correspondence: str = "nearest",
) -> float:
    """Harmonic mean of precision and recall at a distance threshold, x100.

    With `correspondence="index"` distances are taken between same-index
    points (both meshes from the same model); with "nearest" each point
    matches its nearest neighbor in the other set.
    """
    p = np.asarray(pred_vertices, dtype=np.float64)
    g = np.asarray(gt_vertices, dtype=np.float64)
    if p.size == 0 or g.size == 0:
        raise ValueError("point sets must be non-empty")
    thr = threshold_mm / MM_PER_M
    if correspondence == "index":
        if p.shape != g.shape:
            raise ValueError("index correspondence requires equal shapes")
        d = np.linalg.norm(p - g, axis=-1)
        precision = float(np.mean(d <= thr))
        recall = precision
    elif correspondence == "nearest":
        d2 = ((p[:, None, :] - g[None, :, :]) ** 2).sum(-1)
        precision = float(np.mean(np.sqrt(d2.min(axis=1)) <= thr))
        recall = float(np.mean(np.sqrt(d2.min(axis=0)) <= thr))
    else:
        raise ValueError(f"unknown correspondence {correspondence!r}")
    if precision + recall == 0:
        return 0.0
    return 200.0 * precision * recall / (precision + recall)


def pck_curve(
    pred: Sequence[np.ndarray],
    gt: Sequence[np.ndarray],
    thresholds_mm: np.ndarray,
) -> list[tuple[float, float]]:
    """Fraction of joints within each threshold (mm), pooled over all samples.

    Thresholds are absolute millimeters; the curve is monotone
    non-decreasing by construction.
    """
    if len(pred) == 0 or len(pred) != len(gt):
        raise ValueError("need equally many non-empty pred and gt samples")
    errors = []
    for p, g in zip(pred, gt):
        p = np.asarray(p, dtype=np.float64)
        g = np.asarray(g, dtype=np.float64)
        if p.shape != g.shape:
            raise ValueError("joint sets must share shape")
        errors.append(np.linalg.norm(p - g, axis=-1) * MM_PER_M)
    pooled = np.concatenate(errors)
    return [(float(t), float(np.mean(pooled <= t))) for t in np.asarray(thresholds_mm, dtype=np.float64)]
