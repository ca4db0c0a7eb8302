import math

import numpy as np
import pytest

from covis.geometry import CameraPose, OverlapConfig
from covis.world import (
    Landmark,
    WorldModel,
    co_visible,
    generate_world,
    load_world,
    panorama_digest,
    render_panorama,
    save_world,
    visible_set,
)

CFG = OverlapConfig()


def world_with(landmarks, occluders=()):
    return WorldModel(tuple(landmarks), tuple(occluders), (-50, -50, 50, 50), seed=0)


class TestGenerateWorld:
    def test_deterministic(self):
        w1 = generate_world(0.5, 4, (0, 0, 100, 100), seed=9)
        w2 = generate_world(0.5, 4, (0, 0, 100, 100), seed=9)
        assert w1 == w2

    def test_density_and_spacing(self):
        w = generate_world(0.5, 0, (0, 0, 100, 100), seed=1)
        assert 40 <= len(w.landmarks) <= 50
        xy, _, _ = w.landmark_arrays()
        d = np.hypot(xy[:, None, 0] - xy[None, :, 0], xy[:, None, 1] - xy[None, :, 1])
        np.fill_diagonal(d, np.inf)
        assert d.min() >= 1.0

    def test_no_occluders(self):
        assert generate_world(0.5, 0, (0, 0, 50, 50), seed=2).occluders == ()


class TestVisibleSet:
    def test_on_axis_visible(self):
        w = world_with([Landmark(0, 5, 0, 0.5, "red")])
        assert visible_set(w, CameraPose(0, 0, 0), CFG) == {0}

    def test_outside_fov(self):
        w = world_with([Landmark(0, 0, 5, 0.5, "red")])
        assert visible_set(w, CameraPose(0, 0, 0), CFG) == set()

    def test_occluded(self):
        w = world_with(
            [Landmark(0, 5, 0, 0.5, "red")], occluders=[(2, -1, 2, 1)]
        )
        assert visible_set(w, CameraPose(0, 0, 0), CFG) == set()

    def test_beyond_dmax(self):
        w = world_with([Landmark(0, 30, 0, 0.5, "red")])
        assert visible_set(w, CameraPose(0, 0, 0), CFG) == set()

    def test_covisibility_symmetric(self):
        w = generate_world(1.0, 5, (0, 0, 60, 60), seed=3)
        rng = np.random.default_rng(0)
        for _ in range(50):
            a = CameraPose(rng.uniform(0, 60), rng.uniform(0, 60), rng.uniform(-3, 3))
            b = CameraPose(rng.uniform(0, 60), rng.uniform(0, 60), rng.uniform(-3, 3))
            assert co_visible(w, a, b, CFG) == co_visible(w, b, a, CFG)


class TestRenderPanorama:
    def test_empty_world(self):
        pan = render_panorama(world_with([]), CameraPose(0, 0, 0), CFG)
        assert all(i == -1 for i in pan.ids)

    def test_on_axis_depth(self):
        w = world_with([Landmark(7, 5, 0, 0.5, "red")])
        pan = render_panorama(w, CameraPose(0, 0, 0), CFG)
        mid = pan.columns // 2
        assert pan.ids[mid] == 7
        assert pan.depths[mid] == pytest.approx(4.5, abs=0.01)

    def test_deterministic_bits(self):
        w = generate_world(1.0, 3, (0, 0, 60, 60), seed=4)
        pose = CameraPose(30, 30, 1.0)
        p1 = render_panorama(w, pose, CFG)
        p2 = render_panorama(w, pose, CFG)
        assert p1 == p2 and panorama_digest(p1) == panorama_digest(p2)

    def test_occluder_blocks_columns(self):
        w = world_with([Landmark(0, 5, 0, 0.5, "red")], occluders=[(2, -2, 2, 2)])
        pan = render_panorama(w, CameraPose(0, 0, 0), CFG)
        assert pan.hit_ids() == set()

    def test_agrees_with_visible_set_up_to_resolution(self):
        w = generate_world(1.0, 6, (0, 0, 60, 60), seed=5)
        rng = np.random.default_rng(1)
        for _ in range(25):
            pose = CameraPose(rng.uniform(5, 55), rng.uniform(5, 55), rng.uniform(-3, 3))
            vis = visible_set(w, pose, CFG)
            hits = render_panorama(w, pose, CFG).hit_ids()
            # a visible landmark can only be missed if it subtends less than
            # about one column or sits partially behind a closer disk
            col_angle = pose.fov / 128
            for lid in vis - hits:
                lm = next(l for l in w.landmarks if l.id == lid)
                dist = math.hypot(lm.x - pose.x, lm.y - pose.y)
                assert 2 * math.asin(min(1, lm.radius / dist)) < 40 * col_angle

    def test_depths_in_range(self):
        w = generate_world(2.0, 4, (0, 0, 60, 60), seed=6)
        pan = render_panorama(w, CameraPose(30, 30, 0.5), CFG)
        for i, d in zip(pan.ids, pan.depths):
            if i >= 0:
                assert 0 < d <= CFG.d_max


class TestWorldIO:
    def test_roundtrip(self, tmp_path):
        w = generate_world(0.8, 5, (0, 0, 80, 80), seed=11)
        p = tmp_path / "world.json"
        save_world(w, p)
        assert load_world(p) == w

    def test_unique_ids_enforced(self):
        with pytest.raises(ValueError):
            world_with([Landmark(0, 1, 1, 0.5, "red"), Landmark(0, 2, 2, 0.5, "red")])
