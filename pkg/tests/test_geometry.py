import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from covis.geometry import (
    DEFAULT_FOV,
    CameraPose,
    OverlapConfig,
    Pairing,
    Ray,
    RejectReason,
    fov_overlap_batch,
    fov_overlap_heuristic,
    fov_rays,
    ray_intersect,
    sector_oracle,
    transform_pose,
    wrap_angle,
)

CFG = OverlapConfig()


def approx_pt(p, q, tol=1e-9):
    return math.hypot(p[0] - q[0], p[1] - q[1]) <= tol


class TestCameraPose:
    def test_yaw_normalized(self):
        assert CameraPose(0, 0, 3 * math.pi).yaw == pytest.approx(math.pi)
        assert CameraPose(0, 0, -math.pi).yaw == pytest.approx(math.pi)

    def test_fov_bounds(self):
        with pytest.raises(ValueError):
            CameraPose(0, 0, 0, 0.0)
        with pytest.raises(ValueError):
            CameraPose(0, 0, 0, math.pi)

    def test_default_fov(self):
        assert CameraPose(0, 0).fov == pytest.approx(math.radians(52.67))


class TestFovRays:
    def test_half_angle(self):
        left, right = fov_rays(CameraPose(0, 0, 0, math.pi / 2))
        s = math.sqrt(0.5)
        assert approx_pt(left.direction, (s, s))
        assert approx_pt(right.direction, (s, -s))

    def test_origin_and_wrap(self):
        left, right = fov_rays(CameraPose(3, -2, math.pi, math.pi / 3))
        assert left.origin == (3, -2) and right.origin == (3, -2)
        ang = math.atan2(left.direction[1], left.direction[0])
        assert ang == pytest.approx(wrap_angle(math.pi + math.pi / 6))

    def test_paper_default_half_angle(self):
        left, _ = fov_rays(CameraPose(0, 0, 0))
        ang = math.degrees(math.atan2(left.direction[1], left.direction[0]))
        assert ang == pytest.approx(26.335)


class TestRayIntersect:
    def test_perpendicular(self):
        a = Ray.from_angle((0, 0), 0.0)
        b = Ray.from_angle((2, -1), math.pi / 2)
        hit = ray_intersect(a, b)
        assert approx_pt(hit.point, (2, 0))
        assert hit.t_a == pytest.approx(2) and hit.t_b == pytest.approx(1)

    def test_parallel_distinct(self):
        assert ray_intersect(Ray.from_angle((0, 0), 0), Ray.from_angle((0, 1), 0)) is None

    def test_backward_crossing(self):
        a = Ray.from_angle((0, 0), 0.0)
        b = Ray.from_angle((-1, 1), 3 * math.pi / 2)
        assert ray_intersect(a, b) is None

    def test_colinear_overlap(self):
        a = Ray.from_angle((0, 0), 0.0)
        b = Ray.from_angle((3, 0), math.pi)
        hit = ray_intersect(a, b)
        assert hit.degenerate and approx_pt(hit.point, (0, 0))

    @given(
        st.floats(-10, 10), st.floats(-10, 10), st.floats(-math.pi, math.pi),
        st.floats(-10, 10), st.floats(-10, 10), st.floats(-math.pi, math.pi),
    )
    @settings(max_examples=200)
    def test_symmetric_up_to_swap(self, ax, ay, aa, bx, by, ba):
        a = Ray.from_angle((ax, ay), aa)
        b = Ray.from_angle((bx, by), ba)
        h1 = ray_intersect(a, b)
        h2 = ray_intersect(b, a)
        assert (h1 is None) == (h2 is None)
        if h1 is not None and not h1.degenerate:
            assert h1.t_a == pytest.approx(h2.t_b, abs=1e-6)
            assert h1.t_b == pytest.approx(h2.t_a, abs=1e-6)


class TestOverlapHeuristic:
    def test_identity_pose(self):
        p = CameraPose(0, 0, 0)
        v = fov_overlap_heuristic(p, p, CFG)
        assert v.overlaps and v.reject_reason is RejectReason.DEGENERATE_ACCEPTED

    def test_identity_any_pose_dmin_zero(self):
        cfg = OverlapConfig(d_min=0.0)
        for p in [CameraPose(4, -7, 2.1), CameraPose(0, 0, -3), CameraPose(1, 1, 0, 1.0)]:
            assert fov_overlap_heuristic(p, p, cfg).overlaps

    def test_forward_translation(self):
        q = CameraPose(0, 0, 0)
        c = CameraPose(5, 0, 0)
        v = fov_overlap_heuristic(q, c, CFG)
        assert v.overlaps
        half = math.radians(26.335)
        expect = {(2.5, 2.5 * math.tan(half)), (2.5, -2.5 * math.tan(half))}
        found = {(round(p[0], 6), round(p[1], 6)) for p, _ in v.intersections}
        assert {(round(x, 6), round(y, 6)) for x, y in expect} <= found
        for _, d in v.intersections:
            assert d == pytest.approx(2.5 / math.cos(half), rel=1e-6)

    def test_back_to_back(self):
        v = fov_overlap_heuristic(CameraPose(0, 0, math.pi), CameraPose(1, 0, 0), CFG)
        assert not v.overlaps and v.reject_reason is RejectReason.NO_INTERSECTION

    def test_too_far(self):
        v = fov_overlap_heuristic(CameraPose(0, 0, 0), CameraPose(100, 0, math.pi), CFG)
        assert not v.overlaps and v.reject_reason is RejectReason.TOO_FAR

    def test_too_near(self):
        v = fov_overlap_heuristic(CameraPose(0, 0, 0), CameraPose(0.1, 0, math.pi), CFG)
        assert not v.overlaps and v.reject_reason is RejectReason.TOO_NEAR

    def test_accepted_distances_in_range(self):
        rng = np.random.default_rng(3)
        for _ in range(500):
            q = CameraPose(rng.uniform(0, 30), rng.uniform(0, 30), rng.uniform(-3, 3))
            c = CameraPose(rng.uniform(0, 30), rng.uniform(0, 30), rng.uniform(-3, 3))
            v = fov_overlap_heuristic(q, c, CFG)
            if v.overlaps:
                assert v.intersections
                for _, d in v.intersections:
                    assert CFG.d_min <= d <= CFG.d_max

    def test_rigid_motion_invariance(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            q = CameraPose(rng.uniform(0, 30), rng.uniform(0, 30), rng.uniform(-3, 3))
            c = CameraPose(rng.uniform(0, 30), rng.uniform(0, 30), rng.uniform(-3, 3))
            rot, tx, ty = rng.uniform(-3, 3), rng.uniform(-50, 50), rng.uniform(-50, 50)
            q2, c2 = transform_pose(q, rot, tx, ty), transform_pose(c, rot, tx, ty)
            assert (
                fov_overlap_heuristic(q, c, CFG).overlaps
                == fov_overlap_heuristic(q2, c2, CFG).overlaps
            )
            assert sector_oracle(q, c, CFG) == sector_oracle(q2, c2, CFG)

    def test_strict_mode_facing_pair(self):
        cfg = OverlapConfig(require_both=True)
        v = fov_overlap_heuristic(CameraPose(0, 0, 0), CameraPose(10, 0, math.pi), cfg)
        assert v.overlaps

    def test_same_pair_option(self):
        cfg = OverlapConfig(pairing=Pairing.SAME_PAIR)
        assert fov_overlap_heuristic(CameraPose(0, 0, 0), CameraPose(10, 0, math.pi), cfg).overlaps


class TestBatchHeuristic:
    def test_matches_scalar(self):
        rng = np.random.default_rng(5)
        for cfg in (CFG, OverlapConfig(require_both=True), OverlapConfig(pairing=Pairing.SAME_PAIR)):
            q = CameraPose(rng.uniform(0, 30), rng.uniform(0, 30), rng.uniform(-3, 3))
            xs = rng.uniform(0, 30, 400)
            ys = rng.uniform(0, 30, 400)
            yaws = rng.uniform(-math.pi, math.pi, 400)
            fovs = np.full(400, DEFAULT_FOV)
            # include zero-baseline candidates
            xs[:3], ys[:3], yaws[:3] = q.x, q.y, (q.yaw, q.yaw + 1.2, q.yaw + 3.0)
            batch = fov_overlap_batch(q, xs, ys, yaws, fovs, cfg)
            for i in range(400):
                s = fov_overlap_heuristic(q, CameraPose(xs[i], ys[i], yaws[i]), cfg)
                assert s.overlaps == batch[i]

    def test_empty(self):
        z = np.zeros(0)
        assert fov_overlap_batch(CameraPose(0, 0), z, z, z, z, CFG).shape == (0,)


class TestSectorOracle:
    def test_identity(self):
        p = CameraPose(2, 3, 1.0)
        assert sector_oracle(p, p, CFG)

    def test_disjoint_disks(self):
        a = CameraPose(0, 0, math.pi)
        b = CameraPose(3 * CFG.d_max, 0, 0)
        assert not sector_oracle(a, b, CFG)

    def test_forward_translation(self):
        assert sector_oracle(CameraPose(0, 0, 0), CameraPose(5, 0, 0), CFG)

    def test_symmetry(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            a = CameraPose(rng.uniform(0, 40), rng.uniform(0, 40), rng.uniform(-3, 3))
            b = CameraPose(rng.uniform(0, 40), rng.uniform(0, 40), rng.uniform(-3, 3))
            assert sector_oracle(a, b, CFG) == sector_oracle(b, a, CFG)

    def test_oracle_samples_validation(self):
        with pytest.raises(ValueError):
            OverlapConfig(oracle_samples=10)
