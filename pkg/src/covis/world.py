"""Deterministic procedural 2D worlds with an exact visibility oracle.

A world is a set of landmark disks plus occluding wall segments.  Visible
sets and raycast panoramas provide ground truth for what a camera pose can
see, which makes retrieval quality measurable without any generative model:
two poses are co-visible when they share at least one visible landmark.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import jsonio
from .geometry import TOL, CameraPose, OverlapConfig

PANORAMA_COLUMNS = 128
LANDMARK_MIN_SPACING = 1.0
_COLOR_TAGS = ("red", "green", "blue", "yellow", "cyan", "magenta", "orange", "violet")


@dataclass(frozen=True)
class Landmark:
    id: int
    x: float
    y: float
    radius: float
    tag: str

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("landmark radius must be positive")


@dataclass(frozen=True)
class WorldModel:
    landmarks: tuple[Landmark, ...]
    occluders: tuple[tuple[float, float, float, float], ...]
    bounds: tuple[float, float, float, float]
    seed: int

    def __post_init__(self):
        ids = [lm.id for lm in self.landmarks]
        if len(set(ids)) != len(ids):
            raise ValueError("landmark ids must be unique")

    def landmark_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        xy = np.array([(lm.x, lm.y) for lm in self.landmarks], dtype=float).reshape(-1, 2)
        r = np.array([lm.radius for lm in self.landmarks], dtype=float)
        ids = np.array([lm.id for lm in self.landmarks], dtype=np.int64)
        return xy, r, ids

    def occluder_array(self) -> np.ndarray:
        return np.array(self.occluders, dtype=float).reshape(-1, 4)


@dataclass(frozen=True)
class Panorama:
    """Per-column nearest landmark hit: (landmark id, depth) arrays with
    id -1 / depth NaN for empty columns.  Columns sweep the FOV left edge
    to right edge."""
    ids: tuple[int, ...]
    depths: tuple[float, ...]

    @property
    def columns(self) -> int:
        return len(self.ids)

    def hit_ids(self) -> set[int]:
        return {i for i in self.ids if i >= 0}

    def to_bytes(self) -> bytes:
        a = np.array(self.ids, dtype=np.int64).tobytes()
        b = np.array(self.depths, dtype=np.float64).tobytes()
        return a + b


def panorama_digest(pan: Panorama) -> int:
    """Stable 64-bit FNV-1a hash of the panorama contents."""
    h = 0xCBF29CE484222325
    for byte in pan.to_bytes():
        h ^= byte
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def generate_world(
    density: float,
    occluder_count: int,
    bounds: tuple[float, float, float, float],
    seed: int,
) -> WorldModel:
    """Poisson-disk landmark placement at `density` landmarks per 100 m^2
    (min spacing 1 m, dart throwing) plus random wall segments."""
    if density <= 0:
        raise ValueError("density must be positive")
    x0, y0, x1, y1 = bounds
    area = (x1 - x0) * (y1 - y0)
    target = max(1, round(density * area / 100.0))
    rng = np.random.default_rng(seed)

    placed: list[tuple[float, float]] = []
    attempts = 0
    while len(placed) < target and attempts < target * 200:
        attempts += 1
        p = (rng.uniform(x0, x1), rng.uniform(y0, y1))
        if all(math.hypot(p[0] - q[0], p[1] - q[1]) >= LANDMARK_MIN_SPACING for q in placed):
            placed.append(p)

    landmarks = tuple(
        Landmark(
            i,
            px,
            py,
            float(rng.uniform(0.3, 0.5)),
            _COLOR_TAGS[int(rng.integers(len(_COLOR_TAGS)))],
        )
        for i, (px, py) in enumerate(placed)
    )

    occluders = []
    for _ in range(occluder_count):
        cx, cy = rng.uniform(x0, x1), rng.uniform(y0, y1)
        ang = rng.uniform(0, math.tau)
        half = rng.uniform(1.0, 4.0)
        occluders.append(
            (
                float(cx - half * math.cos(ang)),
                float(cy - half * math.sin(ang)),
                float(cx + half * math.cos(ang)),
                float(cy + half * math.sin(ang)),
            )
        )
    return WorldModel(landmarks, tuple(occluders), bounds, seed)


def _segments_blocked(origin: np.ndarray, targets: np.ndarray, occ: np.ndarray) -> np.ndarray:
    """For each target point, whether the open segment origin->target
    properly crosses any occluder segment."""
    if occ.shape[0] == 0 or targets.shape[0] == 0:
        return np.zeros(targets.shape[0], dtype=bool)
    p = origin
    q = targets  # (N, 2)
    blocked = np.zeros(targets.shape[0], dtype=bool)
    for ax, ay, bx, by in occ:
        abx, aby = bx - ax, by - ay
        d1 = abx * (p[1] - ay) - aby * (p[0] - ax)
        d2 = abx * (q[:, 1] - ay) - aby * (q[:, 0] - ax)
        pqx, pqy = q[:, 0] - p[0], q[:, 1] - p[1]
        d3 = pqx * (ay - p[1]) - pqy * (ax - p[0])
        d4 = pqx * (by - p[1]) - pqy * (bx - p[0])
        blocked |= (d1 * d2 < 0) & (d3 * d4 < 0)
    return blocked


def visible_set(world: WorldModel, pose: CameraPose, cfg: OverlapConfig) -> set[int]:
    """Landmark ids whose centers are inside the pose's view sector
    (bearing within fov/2, distance <= d_max) and not occluded."""
    xy, _, ids = world.landmark_arrays()
    if xy.shape[0] == 0:
        return set()
    dx = xy[:, 0] - pose.x
    dy = xy[:, 1] - pose.y
    dist = np.hypot(dx, dy)
    heading_dot = dx * math.cos(pose.yaw) + dy * math.sin(pose.yaw)
    cos_half = math.cos(min(pose.fov / 2.0 + TOL, math.pi))
    in_sector = (dist <= cfg.d_max + TOL) & (heading_dot >= dist * cos_half)
    if not in_sector.any():
        return set()
    cand = np.flatnonzero(in_sector)
    blocked = _segments_blocked(
        np.array([pose.x, pose.y]), xy[cand], world.occluder_array()
    )
    return {int(ids[i]) for i, b in zip(cand, blocked) if not b}


def render_panorama(
    world: WorldModel,
    pose: CameraPose,
    cfg: OverlapConfig,
    columns: int = PANORAMA_COLUMNS,
) -> Panorama:
    """Per-column raycast across the FOV: nearest landmark-disk hit within
    d_max, with occluder segments blocking. Deterministic."""
    angles = pose.yaw - pose.fov / 2.0 + (np.arange(columns) + 0.5) / columns * pose.fov
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)  # (C, 2)
    origin = np.array([pose.x, pose.y])

    xy, radii, ids = world.landmark_arrays()
    best_t = np.full(columns, np.inf)
    best_id = np.full(columns, -1, dtype=np.int64)
    if xy.shape[0] > 0:
        oc = xy - origin  # (L, 2)
        t_mid = dirs @ oc.T  # (C, L)
        perp2 = (oc[:, 0] ** 2 + oc[:, 1] ** 2)[None, :] - t_mid**2
        under = radii[None, :] ** 2 - perp2
        with np.errstate(invalid="ignore"):
            t_hit = t_mid - np.sqrt(np.maximum(under, 0.0))
        valid = (under >= 0) & (t_hit > TOL) & (t_hit <= cfg.d_max)
        t_hit = np.where(valid, t_hit, np.inf)
        nearest = np.argmin(t_hit, axis=1)
        rows = np.arange(columns)
        best_t = t_hit[rows, nearest]
        best_id = np.where(np.isfinite(best_t), ids[nearest], -1)

    occ = world.occluder_array()
    if occ.shape[0] > 0:
        occ_t = np.full(columns, np.inf)
        for ax, ay, bx, by in occ:
            ex, ey = bx - ax, by - ay
            denom = dirs[:, 0] * ey - dirs[:, 1] * ex
            wx, wy = ax - origin[0], ay - origin[1]
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (wx * ey - wy * ex) / denom
                s = (wx * dirs[:, 1] - wy * dirs[:, 0]) / denom
            hit = (np.abs(denom) > TOL) & (t > TOL) & (s >= 0.0) & (s <= 1.0)
            occ_t = np.where(hit, np.minimum(occ_t, np.where(hit, t, np.inf)), occ_t)
        shadowed = occ_t < best_t
        best_t = np.where(shadowed, np.inf, best_t)
        best_id = np.where(shadowed, -1, best_id)

    depths = tuple(float(t) if math.isfinite(t) else math.nan for t in best_t)
    return Panorama(tuple(int(i) for i in best_id), depths)


def co_visible(
    world: WorldModel,
    a: CameraPose,
    b: CameraPose,
    cfg: OverlapConfig,
    min_shared: int = 1,
) -> bool:
    """Ground-truth co-visibility: the poses share >= min_shared landmarks."""
    return len(visible_set(world, a, cfg) & visible_set(world, b, cfg)) >= min_shared


def save_world(world: WorldModel, path: str | Path) -> None:
    doc = {
        "version": 1,
        "seed": world.seed,
        "bounds": list(world.bounds),
        "landmarks": [
            {"id": lm.id, "x": lm.x, "y": lm.y, "radius": lm.radius, "tag": lm.tag}
            for lm in world.landmarks
        ],
        "occluders": [list(o) for o in world.occluders],
    }
    Path(path).write_text(jsonio.dumps17(doc) + "\n")


def load_world(path: str | Path) -> WorldModel:
    doc = jsonio.loads(Path(path).read_text())
    return WorldModel(
        tuple(
            Landmark(l["id"], l["x"], l["y"], l["radius"], l["tag"])
            for l in doc["landmarks"]
        ),
        tuple(tuple(o) for o in doc["occluders"]),
        tuple(doc["bounds"]),
        doc["seed"],
    )
