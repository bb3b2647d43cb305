import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from backreg.errors import DegenerateLandmarksError
from backreg.image import PixelCoord
from backreg.landmarks import LandmarkSet
from backreg.registration import (
    RigidTransform,
    apply_to_points,
    center_at_c7,
    compute_rotation_angle,
    estimate_rigid,
    estimate_similarity_lsq,
    psis_midpoint,
    registration_residuals,
    scale_factor,
    signed_angle,
    trunk_length,
    wrap_angle,
)

from synth import random_landmark_set, random_transform, transformed_set, wrap_array


def grid_search_theta(a, b, c, d, step=1e-5):
    """Brute-force minimizer of max(|left error|, |right error|) over the
    rotation angle; independent of the closed-form path (atan2 only)."""
    ta, tb = math.atan2(a[1], a[0]), math.atan2(b[1], b[0])
    tc, td = math.atan2(c[1], c[0]), math.atan2(d[1], d[0])
    grid = np.arange(-math.pi, math.pi, step)
    left = np.abs(wrap_array(ta - tc - grid))
    right = np.abs(wrap_array(tb - td - grid))
    worst = np.maximum(left, right)
    return float(grid[int(np.argmin(worst))]), float(worst.min())


class TestElementaryOps:
    def test_midpoint_examples(self):
        assert psis_midpoint((0, 0), (10, 0)) == (5, 0)
        assert psis_midpoint((3, 4), (3, 4)) == (3, 4)
        assert psis_midpoint((3, 7), (9, 1)) == (6, 4)

    def test_trunk_length_examples(self):
        assert trunk_length((0, 0), (3, 4)) == 5
        assert trunk_length((2, 2), (2, 2)) == 0
        assert trunk_length((1, 2), (7, 10)) == 10  # sqrt(36 + 64)

    def test_scale_factor(self):
        assert scale_factor(100, 100) == 1.0
        assert scale_factor(100, 50) == 0.5
        assert scale_factor(68, 85) == 1.25

    def test_scale_factor_degenerate(self):
        with pytest.raises(DegenerateLandmarksError):
            scale_factor(0, 10)

    def test_center_at_c7(self):
        s = LandmarkSet(
            c7=PixelCoord(7, 1),
            psis_left=PixelCoord(5, 5),
            psis_right=PixelCoord(9, 5),
            ic=PixelCoord(7, 9),
        )
        left, right = center_at_c7(s)
        assert tuple(left) == (-2, 4) and tuple(right) == (2, 4)

    def test_center_at_c7_trunk_shaped(self):
        s = LandmarkSet(
            c7=PixelCoord(247, 60),
            psis_left=PixelCoord(200, 520),
            psis_right=PixelCoord(294, 522),
            ic=PixelCoord(250, 640),
        )
        left, right = center_at_c7(s)
        assert tuple(left) == (-47, 460) and tuple(right) == (47, 462)

    def test_signed_angle_examples(self):
        assert signed_angle((1, 0)) == 0.0
        assert signed_angle((0, 1)) == pytest.approx(math.pi / 2)
        assert signed_angle((-1, -1)) == pytest.approx(-3 * math.pi / 4)

    def test_signed_angle_zero_vector(self):
        with pytest.raises(DegenerateLandmarksError):
            signed_angle((0, 0))

    @given(st.floats(-50, 50))
    def test_wrap_angle_range(self, a):
        w = wrap_angle(a)
        assert -math.pi < w <= math.pi
        assert math.isclose(math.sin(w), math.sin(a), abs_tol=1e-12)
        assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-12)


class TestRotationAngle:
    def test_already_aligned(self):
        a, b = (-1.0, 2.0), (1.5, 2.0)
        decomp = compute_rotation_angle(a, b, a, b)
        assert decomp.theta == 0.0

    def test_exact_rotation_recovery(self):
        phi = 0.3
        rot = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
        a, b = np.array([-1.0, 2.0]), np.array([1.5, 2.2])
        decomp = compute_rotation_angle(a, b, rot @ a, rot @ b)
        assert decomp.theta == pytest.approx(-0.3, abs=1e-12)

    def test_decomposition_internal_identities(self):
        decomp = compute_rotation_angle((-1, 1), (1, 1), (-1, 2), (2, 1))
        assert decomp.theta_d == pytest.approx(wrap_angle(decomp.theta_a - decomp.theta_c))
        assert decomp.theta == pytest.approx(
            wrap_angle(decomp.theta_d - wrap_angle(decomp.theta_ab - decomp.theta_cd) / 2)
        )

    def test_matches_grid_search_on_asymmetric_pairs(self):
        a, b, c, d = (-1, 1), (1, 1), (-1, 2), (2, 1)
        theta = compute_rotation_angle(a, b, c, d).theta
        best, _ = grid_search_theta(a, b, c, d)
        assert abs(wrap_angle(theta - best)) <= 1e-4

    def test_zero_vector_rejected(self):
        with pytest.raises(DegenerateLandmarksError):
            compute_rotation_angle((0, 0), (1, 1), (1, 0), (0, 1))


class TestEstimateRigid:
    def test_identity_on_equal_sets(self):
        rng = np.random.default_rng(0)
        s = random_landmark_set(rng)
        rep = estimate_rigid(s, s)
        assert rep.transform.scale == pytest.approx(1.0, abs=1e-12)
        assert rep.transform.angle == 0.0
        assert rep.residual_left == rep.residual_right == 0.0
        assert rep.psis_distance_sum == pytest.approx(0.0, abs=1e-9)

    def test_recovers_inverse_of_known_transform(self):
        rng = np.random.default_rng(5)
        target = random_landmark_set(rng)
        t = RigidTransform(2.0, math.radians(30), pivot=target.c7, anchor=target.c7)
        source = transformed_set(target, t)
        rep = estimate_rigid(source, target)
        assert rep.transform.scale == pytest.approx(0.5, abs=1e-9)
        assert rep.transform.angle == pytest.approx(-math.radians(30), abs=1e-9)
        assert rep.residual_left <= 1e-9 and rep.residual_right <= 1e-9

    def test_bisector_equalizes_residuals(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            source, target = random_landmark_set(rng), random_landmark_set(rng)
            rep = estimate_rigid(source, target)
            assert abs(rep.residual_left - rep.residual_right) <= 1e-9

    def test_closed_form_matches_grid_oracle(self):
        rng = np.random.default_rng(13)
        for _ in range(5):
            source, target = random_landmark_set(rng), random_landmark_set(rng)
            rep = estimate_rigid(source, target)
            c_vec, d_vec = center_at_c7(source)
            a_vec, b_vec = center_at_c7(target)
            best, _ = grid_search_theta(a_vec, b_vec, c_vec, d_vec)
            assert abs(wrap_angle(rep.transform.angle - best)) <= 1e-4

    def test_c7_pinned_exactly(self):
        rng = np.random.default_rng(21)
        source, target = random_landmark_set(rng), random_landmark_set(rng)
        rep = estimate_rigid(source, target)
        cx, cy = rep.transform.apply_xy(source.c7.x, source.c7.y)
        assert math.hypot(cx - target.c7.x, cy - target.c7.y) <= 1e-12

    def test_trunk_length_matched_after_transform(self):
        rng = np.random.default_rng(22)
        source, target = random_landmark_set(rng), random_landmark_set(rng)
        rep = estimate_rigid(source, target)
        pts = apply_to_points(rep.transform, [source.c7, source.psis_left, source.psis_right])
        d_after = trunk_length(pts[0], psis_midpoint(pts[1], pts[2]))
        d_target = trunk_length(target.c7, psis_midpoint(target.psis_left, target.psis_right))
        assert d_after == pytest.approx(d_target, rel=1e-9)

    def test_prescaling_source_is_absorbed(self):
        rng = np.random.default_rng(23)
        source, target = random_landmark_set(rng), random_landmark_set(rng)
        scaled = transformed_set(
            source, RigidTransform(3.0, 0.0, PixelCoord(0, 0), PixelCoord(0, 0))
        )
        rep = estimate_rigid(source, target)
        rep2 = estimate_rigid(scaled, target)
        assert rep2.psis_distance_sum == pytest.approx(rep.psis_distance_sum, abs=1e-9)
        assert rep2.residual_left == pytest.approx(rep.residual_left, abs=1e-9)
        assert rep2.transform.scale == pytest.approx(rep.transform.scale / 3.0, rel=1e-9)

    def test_degenerate_psis_at_c7(self):
        s = LandmarkSet(
            c7=PixelCoord(10, 10),
            psis_left=PixelCoord(10, 10),
            psis_right=PixelCoord(20, 10),
            ic=PixelCoord(10, 30),
        )
        with pytest.raises(DegenerateLandmarksError):
            estimate_rigid(s, s)

    def test_degenerate_narrow_subtended_angle(self):
        s = LandmarkSet(
            c7=PixelCoord(100, 0),
            psis_left=PixelCoord(100.0, 500),
            psis_right=PixelCoord(100.0000001, 500),
            ic=PixelCoord(100, 600),
        )
        with pytest.raises(DegenerateLandmarksError):
            estimate_rigid(s, s)

    @given(st.integers(0, 10_000))
    @settings(max_examples=60, deadline=None)
    def test_exact_recovery_property(self, seed):
        rng = np.random.default_rng(seed)
        target = random_landmark_set(rng)
        t = random_transform(rng)
        source = transformed_set(target, t)
        rep = estimate_rigid(source, target)
        assert abs(rep.transform.scale - 1 / t.scale) * t.scale <= 1e-9
        assert abs(wrap_angle(rep.transform.angle + t.angle)) <= 1e-9


class TestApplyAndTransform:
    def test_pivot_maps_to_anchor(self):
        t = RigidTransform(1.7, 0.9, PixelCoord(3, 4), PixelCoord(50, 60))
        assert t.apply_xy(3, 4) == (50, 60)

    def test_identity_keeps_points(self):
        pts = [(1.5, 2.5), (0, 0), (-3, 7)]
        assert apply_to_points(RigidTransform.identity(), pts) == pts

    def test_hand_rotated_point(self):
        t = RigidTransform(2.0, math.pi / 2, PixelCoord(0, 0), PixelCoord(0, 0))
        x, y = t.apply_xy(1, 0)
        assert (x, y) == (pytest.approx(0, abs=1e-12), pytest.approx(2))

    def test_inverse_round_trip(self):
        rng = np.random.default_rng(2)
        t = random_transform(rng)
        inv = t.inverse()
        for _ in range(10):
            p = (float(rng.uniform(-50, 50)), float(rng.uniform(-50, 50)))
            q = t.apply_xy(*p)
            back = inv.apply_xy(*q)
            assert back == (pytest.approx(p[0], abs=1e-9), pytest.approx(p[1], abs=1e-9))

    def test_linear_part_is_similarity(self):
        rng = np.random.default_rng(3)
        t = random_transform(rng)
        lin = t.linear()
        assert np.linalg.det(lin) == pytest.approx(t.scale**2, rel=1e-12)
        assert lin[0, 0] == pytest.approx(lin[1, 1]) and lin[0, 1] == pytest.approx(-lin[1, 0])

    def test_compose_matches_sequential_application(self):
        rng = np.random.default_rng(4)
        t1, t2 = random_transform(rng), random_transform(rng)
        combo = t2.compose_with(t1)
        p = (12.3, -4.5)
        expected = t2.apply_xy(*t1.apply_xy(*p))
        got = combo.apply_xy(*p)
        assert got == (pytest.approx(expected[0], abs=1e-9), pytest.approx(expected[1], abs=1e-9))

    def test_json_round_trip(self):
        t = RigidTransform(1.25, -0.4, PixelCoord(1, 2), PixelCoord(3, 4))
        assert RigidTransform.from_json(t.to_json()) == t


class TestSimilarityLsq:
    @staticmethod
    def _pairs_from(t: RigidTransform, pts):
        return [(p, t.apply_xy(*p)) for p in pts]

    def test_exact_recovery_without_noise(self):
        rng = np.random.default_rng(6)
        t = random_transform(rng)
        pts = [(float(rng.uniform(0, 100)), float(rng.uniform(0, 100))) for _ in range(5)]
        est = estimate_similarity_lsq(self._pairs_from(t, pts))
        for p in pts:
            want = t.apply_xy(*p)
            got = est.apply_xy(*p)
            assert math.hypot(got[0] - want[0], got[1] - want[1]) <= 1e-9

    def test_two_pairs_interpolate_exactly(self):
        pairs = [((0.0, 0.0), (10.0, 5.0)), ((4.0, 0.0), (10.0, 13.0))]
        est = estimate_similarity_lsq(pairs)
        for src, dst in pairs:
            got = est.apply_xy(*src)
            assert math.hypot(got[0] - dst[0], got[1] - dst[1]) <= 1e-9

    def test_noisy_fit_beats_perturbation_grid(self):
        rng = np.random.default_rng(8)
        t = random_transform(rng)
        pts = [(float(rng.uniform(0, 100)), float(rng.uniform(0, 100))) for _ in range(4)]
        pairs = [
            (p, tuple(np.array(t.apply_xy(*p)) + rng.normal(0, 2.0, 2))) for p in pts
        ]
        est = estimate_similarity_lsq(pairs)

        def residual(scale, angle, ax, ay):
            tt = RigidTransform(scale, angle, PixelCoord(0, 0), PixelCoord(ax, ay))
            return sum(
                (tt.apply_xy(*s)[0] - d[0]) ** 2 + (tt.apply_xy(*s)[1] - d[1]) ** 2
                for s, d in pairs
            )

        base = residual(est.scale, est.angle, est.anchor.x, est.anchor.y)
        deltas = np.linspace(-0.05, 0.05, 11)
        for ds in deltas:
            for da in deltas:
                for dt in deltas:
                    r = residual(
                        est.scale + ds, est.angle + da, est.anchor.x + dt, est.anchor.y + dt
                    )
                    assert base <= r + 1e-9

    def test_degenerate_inputs(self):
        with pytest.raises(DegenerateLandmarksError):
            estimate_similarity_lsq([((1, 1), (2, 2))])
        with pytest.raises(DegenerateLandmarksError):
            estimate_similarity_lsq([((1, 1), (2, 2)), ((1, 1), (3, 3))])


class TestResiduals:
    def test_identity_all_zero(self):
        rng = np.random.default_rng(10)
        s = random_landmark_set(rng)
        res = registration_residuals(s, s, RigidTransform.identity())
        assert res["psis_distance_sum"] == 0
        assert res["angular_errors"] == (0.0, 0.0)
        assert res["c7_error"] == 0

    def test_five_pixel_perturbation(self):
        rng = np.random.default_rng(12)
        s = random_landmark_set(rng)
        moved = LandmarkSet(
            c7=s.c7,
            psis_left=PixelCoord(s.psis_left.x + 5, s.psis_left.y),
            psis_right=s.psis_right,
            ic=s.ic,
        )
        res = registration_residuals(s, moved, RigidTransform.identity())
        assert res["psis_distance_sum"] == pytest.approx(5.0)

    def test_both_estimators_agree_on_exact_similarity_data(self):
        rng = np.random.default_rng(14)
        target = random_landmark_set(rng)
        t = RigidTransform(1.6, 0.25, pivot=target.c7, anchor=PixelCoord(300, 200))
        source = transformed_set(target, t)
        rep_angle = estimate_rigid(source, target)
        pairs = [
            ((source.c7.x, source.c7.y), (target.c7.x, target.c7.y)),
            ((source.psis_left.x, source.psis_left.y), (target.psis_left.x, target.psis_left.y)),
            ((source.psis_right.x, source.psis_right.y), (target.psis_right.x, target.psis_right.y)),
            ((source.ic.x, source.ic.y), (target.ic.x, target.ic.y)),
        ]
        t_lsq = estimate_similarity_lsq(pairs)
        res_angle = registration_residuals(source, target, rep_angle.transform)
        res_lsq = registration_residuals(source, target, t_lsq)
        assert res_angle["psis_distance_sum"] == pytest.approx(0.0, abs=1e-7)
        assert res_lsq["psis_distance_sum"] == pytest.approx(0.0, abs=1e-7)
