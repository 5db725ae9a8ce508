import numpy as np
import pytest

from dahyf.camera import WeakCamera, project_points, weak_to_full
from dahyf.codec import CodecConfig, decode_soft_argmax, encode_labels, log_probs
from dahyf.confidence import (
    ContrastivePair,
    DegenerateJointsError,
    contrastive_loss,
    cosine_confidence,
    normalize_pred,
    normalize_proj,
    sample_negative_patches,
)
from dahyf.geometry import PatchSpec, frame_to_patch_abs
from dahyf.hand_model import HandPose, HandShape, forward_kinematics


def make_spec(**kw):
    base = dict(frame_w=640, frame_h=480, upper_left=(100.0, 50.0), patch_size=200.0, focal=800.0)
    base.update(kw)
    return PatchSpec(**base)


class TestNormalization:
    def test_pred_center_is_zero(self):
        spec = make_spec()
        v = normalize_pred(np.full((21, 2), 112.0), spec)
        np.testing.assert_allclose(v, 0.0, atol=1e-12)

    def test_pred_origin_joint(self):
        v = normalize_pred(np.zeros((1, 2)), make_spec())
        np.testing.assert_allclose(v, [-0.5, -0.5], atol=1e-12)

    def test_pred_far_corner_identity_patch(self):
        spec = make_spec(patch_size=224.0)
        v = normalize_pred(np.full((1, 2), 224.0), spec)
        np.testing.assert_allclose(v, [0.5, 0.5], atol=1e-12)

    def test_proj_center_is_zero(self):
        spec = make_spec()
        v = normalize_proj(np.tile(spec.center, (21, 1)), spec)
        np.testing.assert_allclose(v, 0.0, atol=1e-12)

    def test_proj_one_patch_away(self):
        spec = make_spec()
        pts = np.array([spec.center]) + [spec.patch_size, 0.0]
        np.testing.assert_allclose(normalize_proj(pts, spec), [1.0, 0.0], atol=1e-12)

    def test_proj_translation_with_center_cancels(self, rng):
        spec = make_spec()
        pts = rng.uniform(0, 400, size=(21, 2))
        shifted_spec = make_spec(upper_left=(100.0 + 30.0, 50.0 - 12.0))
        np.testing.assert_allclose(
            normalize_proj(pts + [30.0, -12.0], shifted_spec),
            normalize_proj(pts, spec),
            atol=1e-12,
        )

    def test_pred_and_proj_coincide_when_patch_fills_frame(self, rng):
        # with s_i = s_p and the patch at the origin, the detection and
        # reprojection normalizations are the same map
        spec = make_spec(upper_left=(0.0, 0.0), patch_size=224.0, net_size=224)
        pts = rng.uniform(0, 224, size=(21, 2))
        np.testing.assert_allclose(normalize_pred(pts, spec), normalize_proj(pts, spec), atol=1e-12)

    def test_interleaved_layout(self):
        spec = make_spec()
        pts = np.zeros((21, 2))
        pts[3] = [224.0, 112.0]
        v = normalize_pred(pts, spec)
        assert v.shape == (42,)
        # joint 3 occupies slots 6 (x) and 7 (y)
        assert v[6] == pytest.approx((224.0 * (200.0 / 224.0) - 100.0) / 200.0)


class TestCosine:
    def test_self_similarity(self, rng):
        a = rng.normal(size=42)
        assert cosine_confidence(a, a) == pytest.approx(1.0, abs=1e-12)

    def test_antipodal(self, rng):
        a = rng.normal(size=42)
        assert cosine_confidence(a, -a) == pytest.approx(-1.0, abs=1e-12)

    def test_scale_invariance(self, rng):
        a = rng.normal(size=42)
        assert cosine_confidence(a, 2.0 * a) == pytest.approx(1.0, abs=1e-12)
        assert cosine_confidence(3.5 * a, a) == pytest.approx(1.0, abs=1e-12)

    def test_symmetry_and_bounds(self, rng):
        for _ in range(100):
            a, b = rng.normal(size=(2, 42))
            c = cosine_confidence(a, b)
            assert -1.0 <= c <= 1.0
            assert c == pytest.approx(cosine_confidence(b, a), abs=1e-12)

    def test_degenerate_is_error_not_nan(self):
        with pytest.raises(DegenerateJointsError):
            cosine_confidence(np.zeros(42), np.ones(42))


class TestContrastiveLoss:
    def test_perfect_pairs(self, rng):
        a = rng.normal(size=42)
        pairs = [ContrastivePair(a, 2 * a, True), ContrastivePair(a, -a, False)]
        assert contrastive_loss(pairs) == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal_positive(self):
        a = np.zeros(42)
        b = np.zeros(42)
        a[0] = 1.0
        b[1] = 1.0
        assert contrastive_loss([ContrastivePair(a, b, True)]) == pytest.approx(1.0)

    def test_negative_target_option(self):
        a = np.zeros(42)
        b = np.zeros(42)
        a[0] = 1.0
        b[1] = 1.0
        # cosine 0 with target 0: already perfect
        assert contrastive_loss([ContrastivePair(a, b, False)], negative_target=0.0) == pytest.approx(0.0)

    def test_mean_reduction(self, rng):
        a = rng.normal(size=42)
        pairs = [ContrastivePair(a, a, True), ContrastivePair(a, a, False)]
        # cosines are (1, 1); targets (1, -1): mean((0)^2, (2)^2) = 2
        assert contrastive_loss(pairs) == pytest.approx(2.0, abs=1e-9)

    def test_empty_set_rejected(self):
        with pytest.raises(ValueError):
            contrastive_loss([])


class TestSelfConsistency:
    def test_projected_then_decoded_pose_scores_high(self, toy_model, rng):
        # positive pair built from the pipeline's own chain: project a pose,
        # map to patch pixels, encode and decode the labels, then compare
        spec = make_spec()
        cfg = CodecConfig()
        for _ in range(10):
            pose = HandPose(rng.normal(0, 0.5, (16, 3)))
            weak = WeakCamera(4.0, 0.0, -0.1)
            joints3d = forward_kinematics(toy_model, HandShape.zeros(), pose)
            frame_uv = project_points(joints3d, weak_to_full(weak, spec))
            patch_px = frame_to_patch_abs(frame_uv, spec)
            decoded = decode_soft_argmax(log_probs(encode_labels(patch_px, cfg)), cfg)
            conf = cosine_confidence(
                normalize_pred(decoded, spec), normalize_proj(frame_uv, spec)
            )
            assert conf >= 0.999


class TestNegativePatchSampling:
    def test_no_boxes_accepts_anything(self):
        patches = sample_negative_patches(640, 480, [], count=5, rng_seed=1)
        assert len(patches) == 5
        for p in patches:
            assert 0 <= p.upper_left[0] <= 640 - p.patch_size
            assert 0 <= p.upper_left[1] <= 480 - p.patch_size

    def test_full_frame_box_infeasible(self):
        with pytest.raises(ValueError, match="attempts"):
            sample_negative_patches(640, 480, [(0, 0, 640, 480)], count=1, rng_seed=1)

    def test_deterministic_given_seed(self):
        a = sample_negative_patches(640, 480, [(200, 100, 400, 300)], count=8, rng_seed=42)
        b = sample_negative_patches(640, 480, [(200, 100, 400, 300)], count=8, rng_seed=42)
        assert [p.to_dict() for p in a] == [p.to_dict() for p in b]

    def test_overlap_constraint_respected(self):
        box = (200.0, 100.0, 400.0, 300.0)
        patches = sample_negative_patches(640, 480, [box], count=20, rng_seed=3)
        for p in patches:
            x0, y0 = p.upper_left
            ix = max(0.0, min(x0 + p.patch_size, box[2]) - max(x0, box[0]))
            iy = max(0.0, min(y0 + p.patch_size, box[3]) - max(y0, box[1]))
            assert ix * iy / p.patch_size**2 < 0.05
