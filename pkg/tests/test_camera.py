import numpy as np
import pytest

from dahyf.camera import FullCamera, WeakCamera, project_points, weak_to_full
from dahyf.geometry import PatchSpec
from dahyf.hand_model import HandPose, HandShape, forward_kinematics


def centered_spec(patch_size=224.0, focal=800.0):
    half = patch_size / 2.0
    return PatchSpec(640, 480, (320.0 - half, 240.0 - half), patch_size, focal=focal)


class TestWeakToFull:
    def test_centered_unit_scale(self):
        cam = weak_to_full(WeakCamera(1.0, 0.0, 0.0), centered_spec())
        np.testing.assert_allclose(cam.translation, [0.0, 0.0, 7.142857142857143], atol=1e-12)
        assert cam.principal == (320.0, 240.0)

    def test_offset_patch_center(self):
        spec = PatchSpec(640, 480, (320.0 - 112.0 + 112.0, 240.0 - 112.0), 224.0, focal=800.0)
        cam = weak_to_full(WeakCamera(1.0, 0.0, 0.0), spec)
        assert cam.translation[0] == pytest.approx(1.0)
        assert cam.translation[1] == pytest.approx(0.0)

    def test_scale_halves_depth(self):
        cam = weak_to_full(WeakCamera(2.0, 0.0, 0.0), centered_spec())
        assert cam.translation[2] == pytest.approx(3.571428571428571)

    def test_head_translation_passthrough(self):
        cam = weak_to_full(WeakCamera(1.0, 0.25, -0.5), centered_spec())
        assert cam.translation[0] == pytest.approx(0.25)
        assert cam.translation[1] == pytest.approx(-0.5)

    def test_invalid_scale(self):
        with pytest.raises(ValueError):
            WeakCamera(0.0, 0.0, 0.0)

    def test_focal_fallback(self):
        spec = PatchSpec(640, 480, (208.0, 128.0), 224.0, focal=None)
        cam = weak_to_full(WeakCamera(1.0, 0.0, 0.0), spec)
        assert cam.focal == 800.0  # sqrt(640^2 + 480^2)


class TestProjection:
    def test_on_axis_point_hits_principal(self):
        cam = weak_to_full(WeakCamera(1.0, 0.0, 0.0), centered_spec())
        uv = project_points(np.zeros((1, 3)), cam)
        np.testing.assert_allclose(uv, [[320.0, 240.0]], atol=1e-12)

    def test_unit_offset(self):
        cam = weak_to_full(WeakCamera(1.0, 0.0, 0.0), centered_spec())
        uv = project_points(np.array([[1.0, 0.0, 0.0]]), cam)
        np.testing.assert_allclose(uv, [[432.0, 240.0]], atol=1e-9)

    def test_ray_scale_invariance(self, rng):
        cam = FullCamera(800.0, (320.0, 240.0), np.array([0.1, -0.2, 2.0]))
        pts = rng.normal(0, 0.05, size=(21, 3))
        lam = 3.7
        scaled = (pts + cam.translation) * lam - cam.translation
        np.testing.assert_allclose(project_points(pts, cam), project_points(scaled, cam), atol=1e-9)

    def test_behind_camera_is_hard_error(self):
        cam = FullCamera(800.0, (320.0, 240.0), np.array([0.0, 0.0, 0.5]))
        with pytest.raises(ValueError, match="behind"):
            project_points(np.array([[0.0, 0.0, -0.5]]), cam)

    def test_full_camera_validation(self):
        with pytest.raises(ValueError):
            FullCamera(800.0, (320.0, 240.0), np.array([0.0, 0.0, -1.0]))
        with pytest.raises(ValueError):
            FullCamera(-1.0, (320.0, 240.0), np.array([0.0, 0.0, 1.0]))


class TestWeakPerspectiveLimit:
    def test_converges_to_weak_map(self, toy_model, rng):
        # narrow field of view and a hand much smaller than its depth: the
        # perspective projection approaches the scaled-orthographic map
        spec = PatchSpec(640, 480, (270.0, 190.0), 100.0, focal=2000.0)
        for _ in range(20):
            weak = WeakCamera(
                scale=float(rng.uniform(0.5, 1.5)),
                tx=float(rng.uniform(-0.05, 0.05)),
                ty=float(rng.uniform(-0.05, 0.05)),
            )
            cam = weak_to_full(weak, spec)
            pose = HandPose(rng.normal(0, 0.6, (16, 3)))
            joints = forward_kinematics(toy_model, HandShape.zeros(), pose)
            joints = joints - joints.mean(axis=0)  # center the cloud
            extent = np.ptp(joints, axis=0).max()
            assert extent <= 0.2 * cam.translation[2]

            full_uv = project_points(joints, cam)
            weak_uv = (
                np.asarray(spec.center)
                + weak.scale * spec.patch_size / 2.0 * (joints[:, :2] + [weak.tx, weak.ty])
            )
            # within 1% of the patch size
            assert np.abs(full_uv - weak_uv).max() < 0.01 * spec.patch_size

    def test_patch_shift_moves_projection(self, toy_model):
        # small-hand limit: moving the crop center by d moves the hand by d
        joints = forward_kinematics(toy_model, HandShape.zeros(), HandPose.zeros()) * 1e-4
        base = PatchSpec(640, 480, (270.0, 190.0), 100.0, focal=2000.0)
        shifted = PatchSpec(640, 480, (270.0 + 17.0, 190.0 - 6.0), 100.0, focal=2000.0)
        weak = WeakCamera(1.0, 0.0, 0.0)
        a = project_points(joints, weak_to_full(weak, base))
        b = project_points(joints, weak_to_full(weak, shifted))
        assert np.abs(b - a - np.array([17.0, -6.0])).max() < 1e-3
