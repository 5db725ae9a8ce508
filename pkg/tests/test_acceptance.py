"""Acceptance suite: every release criterion at its stated tolerance.

Run with `pytest tests/test_acceptance.py -v -s` to see one PASS/FAIL line
per criterion.
"""

import time
from contextlib import contextmanager

import numpy as np
from scipy.optimize import minimize_scalar

from dahyf.codec import CodecConfig, decode_soft_argmax, encode_labels, log_probs
from dahyf.confidence import (
    ContrastivePair,
    contrastive_loss,
    cosine_confidence,
    cosine_confidence_grad,
)
from dahyf.data import synth_sequence, write_jsonl
from dahyf.fusion import pe_normalize, positional_encode
from dahyf.geometry import PatchSpec, global_direction_map, local_direction_map
from dahyf.hand_model import (
    HandPose,
    HandShape,
    bone_vectors,
    forward_kinematics,
    rodrigues,
    so3_log,
)
from dahyf.losses import (
    finite_diff_gradient,
    kl_divergence,
    kl_divergence_grad,
    l2_loss,
    l2_loss_grad,
)
from dahyf.metrics import joint_errors
from dahyf.pipeline import PipelineConfig, run_pipeline


@contextmanager
def criterion(number, label):
    try:
        yield
    except Exception:
        print(f"[FAIL] criterion {number}: {label}")
        raise
    print(f"[PASS] criterion {number}: {label}")


def random_rotation(rng):
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


def test_criterion_1_codec_roundtrip():
    with criterion(1, "codec round-trip and quantization bound"):
        cfg = CodecConfig()  # net 224, 3 bins/px, sigma 6
        start = time.perf_counter()

        coords = np.linspace(8.0, 216.0, 10_000)
        worst = 0.0
        for chunk in np.array_split(coords, 10):
            joints = np.column_stack([chunk, chunk[::-1]])
            decoded = decode_soft_argmax(log_probs(encode_labels(joints, cfg)), cfg)
            worst = max(worst, np.abs(decoded - joints).max())
        assert worst < 1e-3, f"round-trip error {worst}"

        # hard-argmax equivalent: one-hot target at the nearest bin
        sweep = np.arange(0.0, (cfg.n_bins - 1) / cfg.scale, 0.003)
        nearest = np.round(sweep * cfg.scale)
        quant_err = np.abs(nearest / cfg.scale - sweep).max()
        assert quant_err <= 1.0 / (2 * cfg.scale) + 1e-12, f"quantization error {quant_err}"

        elapsed = time.perf_counter() - start
        assert elapsed < 5.0, f"runtime {elapsed:.2f}s"


def test_criterion_2_direction_map_discriminability():
    with criterion(2, "global maps discriminate crops, local maps cannot"):
        rng = np.random.default_rng(2)
        local_ref = local_direction_map(56, 2).values.tobytes()
        for _ in range(1000):
            ulc = (rng.uniform(-100, 600), rng.uniform(-100, 450))
            size = rng.uniform(40, 400)
            spec_a = PatchSpec(640, 480, ulc, size, focal=800.0)
            if rng.uniform() < 0.5:
                spec_b = PatchSpec(
                    640, 480, (ulc[0] + rng.uniform(0.5, 80), ulc[1] - rng.uniform(0.5, 80)),
                    size, focal=800.0,
                )
            else:
                spec_b = PatchSpec(640, 480, ulc, size + rng.uniform(0.5, 80), focal=800.0)
            ga = global_direction_map(spec_a, 2).values
            gb = global_direction_map(spec_b, 2).values
            assert np.abs(ga - gb).max() > 1e-12
            assert local_direction_map(spec_a.feat_size, 2).values.tobytes() == local_ref

        spot = global_direction_map(PatchSpec(640, 480, (100.0, 50.0), 200.0, focal=800.0), 2)
        assert abs(spot.values[0, 0, 0] - (-0.27277)) < 1e-4
        assert abs(spot.values[1, 0, 0] - (-0.23527)) < 1e-4


def test_criterion_3_translation_covariance():
    with criterion(3, "direction maps are translation-covariant"):
        # exactly representable geometry: bit-level equality
        spec = PatchSpec(640, 480, (96.0, 32.0), 224.0, focal=512.0)
        shifted = PatchSpec(640, 480, (96.0 + 64.0, 32.0 + 128.0), 224.0, focal=512.0)
        a = global_direction_map(spec, 2).values
        b = global_direction_map(shifted, 2).values
        assert np.array_equal(b[0], a[0] + 64.0 / 512.0)
        assert np.array_equal(b[1], a[1] + 128.0 / 512.0)

        rng = np.random.default_rng(3)
        for _ in range(200):
            ulc = (rng.uniform(-100, 600), rng.uniform(-100, 450))
            size = rng.uniform(40, 400)
            f = rng.uniform(300, 2000)
            dx, dy = rng.uniform(-150, 150, 2)
            base = PatchSpec(640, 480, ulc, size, focal=f)
            moved = PatchSpec(640, 480, (ulc[0] + dx, ulc[1] + dy), size, focal=f)
            ga = global_direction_map(base, 2).values
            gb = global_direction_map(moved, 2).values
            assert np.abs(gb[0] - ga[0] - dx / f).max() < 1e-12
            assert np.abs(gb[1] - ga[1] - dy / f).max() < 1e-12


def test_criterion_4_fk_rigidity_and_equivariance(toy_model):
    with criterion(4, "FK rigidity, equivariance, zero-pose identity"):
        zero = forward_kinematics(toy_model, HandShape.zeros(), HandPose.zeros())
        assert np.array_equal(zero, toy_model.rest_joints)

        rng = np.random.default_rng(4)
        shape = HandShape.zeros()
        rest_lengths = np.linalg.norm(bone_vectors(toy_model.rest_joints, toy_model.parent), axis=1)
        worst_bone = 0.0
        worst_equiv = 0.0
        for _ in range(10_000):
            pose = HandPose(rng.normal(0, 1.0, (16, 3)))
            joints = forward_kinematics(toy_model, shape, pose)
            lengths = np.linalg.norm(bone_vectors(joints, toy_model.parent), axis=1)
            worst_bone = max(worst_bone, np.abs(lengths - rest_lengths).max())

            extra = rng.normal(0, 1.0, 3)
            rotations = pose.rotations.copy()
            rotations[0] = so3_log(rodrigues(extra) @ rodrigues(pose.rotations[0]))
            rotated = forward_kinematics(toy_model, shape, HandPose(rotations))
            expected = (joints - joints[0]) @ rodrigues(extra).T + joints[0]
            worst_equiv = max(worst_equiv, np.abs(rotated - expected).max())
        assert worst_bone < 1e-9, f"bone deviation {worst_bone}"
        assert worst_equiv < 1e-9, f"equivariance residual {worst_equiv}"


def test_criterion_5_positional_encoding_contract():
    with criterion(5, "positional encoding length, range, and exact values"):
        mu = pe_normalize(np.random.default_rng(5).uniform(0, 224, (21, 2)), 224, 800.0)
        vec = positional_encode(mu, 4)
        assert vec.size == 336
        assert np.all(vec >= -1.0) and np.all(vec <= 1.0)
        # sin/cos of pi/2 multiples; exact up to float64 rounding of pi
        got = positional_encode(np.array([0.25]), 4)
        np.testing.assert_allclose(got, [1, 0, 0, -1, 0, 1, 0, 1], atol=1e-12)


def test_criterion_6_gradient_oracle(toy_model):
    with criterion(6, "analytic gradients match finite differences"):
        rng = np.random.default_rng(6)
        rel = lambda a, n: np.max(np.abs(a - n)) / (np.max(np.abs(n)) + 1e-300)

        for _ in range(100):
            t = rng.dirichlet(np.ones(9), size=(2, 2))
            f = rng.normal(size=(2, 2, 9))
            assert rel(kl_divergence_grad(t, f), finite_diff_gradient(lambda v: kl_divergence(t, v), f)) < 1e-5

        for _ in range(100):
            gt = rng.normal(size=12)
            x = rng.normal(size=12)
            assert rel(l2_loss_grad(x, gt), finite_diff_gradient(lambda v: l2_loss(v, gt), x)) < 1e-5

        for _ in range(100):
            a, b = rng.normal(size=(2, 42))
            assert rel(cosine_confidence_grad(a, b), finite_diff_gradient(lambda v: cosine_confidence(v, b), a)) < 1e-5

        for term in (0.1, 0.9, 2.5, 17.0):
            res = minimize_scalar(
                lambda s: term / s + np.log(s), bounds=(1e-8, 1e3), method="bounded",
                options={"xatol": 1e-12},
            )
            assert abs(res.x - term) < 1e-6


def test_criterion_7_procrustes_properties(toy_model):
    with criterion(7, "Procrustes alignment optimality and reflection exclusion"):
        rng = np.random.default_rng(7)
        shape = HandShape.zeros()
        for _ in range(10_000):
            pose = HandPose(rng.normal(0, 0.8, (16, 3)))
            gt = forward_kinematics(toy_model, shape, pose)
            transform = rng.uniform(0.5, 2.0) * gt @ random_rotation(rng).T + rng.normal(0, 0.2, 3)
            pred = transform + rng.normal(0, 1e-3, size=gt.shape)
            errs = joint_errors(pred, gt)
            assert errs["pa_mpjpe"] <= errs["mpjpe"] + 1e-9

        for _ in range(200):
            pose = HandPose(rng.normal(0, 0.8, (16, 3)))
            gt = forward_kinematics(toy_model, shape, pose)
            exact = rng.uniform(0.5, 2.0) * gt @ random_rotation(rng).T + rng.normal(0, 0.2, 3)
            assert joint_errors(exact, gt)["pa_mpjpe"] < 1e-9

            mirrored = gt * np.array([-1.0, 1.0, 1.0])
            assert joint_errors(mirrored, gt)["pa_mpjpe"] > 0.0


def test_criterion_8_end_to_end_self_consistency(toy_model, tmp_path):
    with criterion(8, "pipeline self-consistency, exact gating, filtering gain"):
        start = time.perf_counter()
        config = PipelineConfig()

        clean = synth_sequence(toy_model, 300, noise_px=0.0, outlier_rate=0.0, seed=8)
        write_jsonl(clean.gt, tmp_path / "gt.jsonl")
        write_jsonl(clean.observed, tmp_path / "obs.jsonl")
        report = run_pipeline(config, tmp_path / "obs.jsonl", tmp_path / "out.jsonl",
                              gt_path=tmp_path / "gt.jsonl")
        assert report["confidence"]["min"] >= 0.999
        assert report["replaced_frames"] == [] and report["unreliable_frames"] == []
        assert report["metrics"]["mpjpe_mm"] < 1e-6
        assert report["metrics"]["epe_observed_px"] < 1e-6

        dirty = synth_sequence(toy_model, 300, noise_px=0.5, outlier_rate=0.10, seed=8)
        write_jsonl(dirty.gt, tmp_path / "gt2.jsonl")
        write_jsonl(dirty.observed, tmp_path / "obs2.jsonl")
        report2 = run_pipeline(config, tmp_path / "obs2.jsonl", tmp_path / "out2.jsonl",
                               gt_path=tmp_path / "gt2.jsonl")
        assert len(dirty.outlier_indices) == 30
        assert report2["replaced_frames"] == dirty.outlier_indices
        assert report2["unreliable_frames"] == []
        assert report2["metrics"]["epe_reproj_post_px"] < report2["metrics"]["epe_reproj_pre_px"]

        elapsed = time.perf_counter() - start
        assert elapsed < 30.0, f"runtime {elapsed:.2f}s"


def test_criterion_9_confidence_algebra():
    with criterion(9, "cosine confidence algebra and contrastive loss zeros"):
        rng = np.random.default_rng(9)
        for _ in range(100):
            a = rng.normal(size=42)
            lam = rng.uniform(0.1, 10.0)
            assert abs(cosine_confidence(a, a) - 1.0) < 1e-12
            assert abs(cosine_confidence(a, -a) + 1.0) < 1e-12
            assert abs(cosine_confidence(a, lam * a) - 1.0) < 1e-12
        a = rng.normal(size=42)
        pairs = [ContrastivePair(a, 3.0 * a, True), ContrastivePair(a, -0.5 * a, False)]
        assert contrastive_loss(pairs) < 1e-24


def test_criterion_10_determinism(toy_model, tmp_path):
    with criterion(10, "same seed, byte-identical outputs"):
        paths = {}
        for run in ("a", "b"):
            gt = tmp_path / f"gt_{run}.jsonl"
            obs = tmp_path / f"obs_{run}.jsonl"
            out = tmp_path / f"out_{run}.jsonl"
            rep = tmp_path / f"rep_{run}.json"
            seq = synth_sequence(toy_model, 60, noise_px=0.7, outlier_rate=0.1, seed=123)
            write_jsonl(seq.gt, gt)
            write_jsonl(seq.observed, obs)
            run_pipeline(PipelineConfig(), obs, out, report_path=rep, gt_path=gt)
            paths[run] = (gt.read_bytes(), obs.read_bytes(), out.read_bytes(), rep.read_bytes())
        assert paths["a"] == paths["b"]
