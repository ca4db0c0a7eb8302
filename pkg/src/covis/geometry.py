"""Planar camera-pose algebra, ray intersection, and FOV-overlap tests.

Everything here works in a top-down 2D world: a camera is a point with a
heading (yaw about the z-axis) and an angular field of view.  The fast
overlap check intersects boundary rays of the two view fans; the slow
sector oracle decides overlap of the actual fan-shaped regions by
stratified sampling and is used to audit the fast check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

TOL = 1e-9
DEFAULT_FOV = math.radians(52.67)
# Intrinsics recorded alongside poses for provenance only; never used in math.
FOCAL_LENGTH_MM = 24.0
APERTURE = 10.0


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    w = math.remainder(theta, math.tau)
    if w <= -math.pi:
        w = math.pi
    return w


@dataclass(frozen=True)
class CameraPose:
    x: float
    y: float
    yaw: float = 0.0
    fov: float = DEFAULT_FOV

    def __post_init__(self):
        if not (0.0 < self.fov < math.pi):
            raise ValueError(f"fov must be in (0, pi), got {self.fov}")
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    def moved(self, dx: float = 0.0, dy: float = 0.0, dyaw: float = 0.0) -> "CameraPose":
        return CameraPose(self.x + dx, self.y + dy, self.yaw + dyaw, self.fov)


def transform_pose(pose: CameraPose, rotation: float, tx: float, ty: float) -> CameraPose:
    """Apply a rigid planar motion (rotate about origin, then translate)."""
    c, s = math.cos(rotation), math.sin(rotation)
    return CameraPose(
        c * pose.x - s * pose.y + tx,
        s * pose.x + c * pose.y + ty,
        pose.yaw + rotation,
        pose.fov,
    )


@dataclass(frozen=True)
class Ray:
    origin: tuple[float, float]
    direction: tuple[float, float]

    def __post_init__(self):
        n = math.hypot(*self.direction)
        if abs(n - 1.0) > TOL:
            raise ValueError(f"ray direction must be unit length, |d|={n}")

    @classmethod
    def from_angle(cls, origin: tuple[float, float], angle: float) -> "Ray":
        return cls(origin, (math.cos(angle), math.sin(angle)))

    def point_at(self, t: float) -> tuple[float, float]:
        return (self.origin[0] + t * self.direction[0], self.origin[1] + t * self.direction[1])


def fov_rays(pose: CameraPose) -> tuple[Ray, Ray]:
    """Boundary rays of the view fan: (left, right) at yaw +- fov/2."""
    half = pose.fov / 2.0
    o = (pose.x, pose.y)
    return Ray.from_angle(o, pose.yaw + half), Ray.from_angle(o, pose.yaw - half)


@dataclass(frozen=True)
class RayHit:
    point: tuple[float, float]
    t_a: float
    t_b: float
    degenerate: bool = False


def _cross(ax: float, ay: float, bx: float, by: float) -> float:
    return ax * by - ay * bx


def ray_intersect(a: Ray, b: Ray) -> Optional[RayHit]:
    """Forward intersection of two rays.

    Returns None for parallel distinct lines and for crossings that fall
    behind either origin.  Colinear overlapping rays return the nearest
    common point, flagged degenerate.
    """
    ux, uy = a.direction
    vx, vy = b.direction
    qx = b.origin[0] - a.origin[0]
    qy = b.origin[1] - a.origin[1]
    denom = _cross(ux, uy, vx, vy)
    if abs(denom) <= TOL:
        if abs(_cross(qx, qy, ux, uy)) > TOL:
            return None  # parallel, distinct lines
        # Colinear: find the nearest point common to both half-lines.
        s0 = qx * ux + qy * uy  # b.origin along a
        same_dir = (vx * ux + vy * uy) > 0.0
        if same_dir:
            s_star = max(0.0, s0)
            return RayHit(a.point_at(s_star), s_star, s_star - s0, degenerate=True)
        if s0 < -TOL:
            return None  # half-lines point apart
        return RayHit(a.point_at(0.0), 0.0, s0, degenerate=True)
    t_a = _cross(qx, qy, vx, vy) / denom
    t_b = _cross(qx, qy, ux, uy) / denom
    if t_a < -TOL or t_b < -TOL:
        return None
    t_a = max(t_a, 0.0)
    t_b = max(t_b, 0.0)
    return RayHit(a.point_at(t_a), t_a, t_b)


class Pairing(str, Enum):
    CROSS_PAIR = "cross"
    SAME_PAIR = "same"


class RejectReason(str, Enum):
    NO_INTERSECTION = "NoIntersection"
    TOO_NEAR = "TooNear"
    TOO_FAR = "TooFar"
    DEGENERATE_ACCEPTED = "Degenerate-Accepted"


@dataclass(frozen=True)
class OverlapConfig:
    d_min: float = 0.25
    d_max: float = 20.0
    pairing: Pairing = Pairing.CROSS_PAIR
    oracle_samples: int = 4096
    # Strict mode: both crossings of the configured pairing must be in range.
    # The calibrated default accepts one in-range crossing from any pairing;
    # the strict rule misses most genuine overlaps (see calibration suite).
    require_both: bool = False

    def __post_init__(self):
        if not (0.0 <= self.d_min < self.d_max):
            raise ValueError(f"need 0 <= d_min < d_max, got [{self.d_min}, {self.d_max}]")
        if self.oracle_samples < 1000:
            raise ValueError("oracle_samples must be >= 1000")


@dataclass(frozen=True)
class OverlapVerdict:
    overlaps: bool
    intersections: tuple[tuple[tuple[float, float], float], ...] = ()
    reject_reason: Optional[RejectReason] = None


def _ray_pairs(query: CameraPose, cand: CameraPose, pairing: Pairing):
    """Ray pairs in evaluation order: the configured pairing first, then the
    complementary pairing (the latter is only consulted in relaxed mode)."""
    ql, qr = fov_rays(query)
    cl, cr = fov_rays(cand)
    cross = ((ql, cr), (qr, cl))
    same = ((ql, cl), (qr, cr))
    return cross + same if pairing is Pairing.CROSS_PAIR else same + cross


def _ray_line_hit(ray: Ray, line: Ray) -> Optional[tuple[float, bool]]:
    """Distance along `ray` to where it crosses the infinite line through
    `line`; None when no forward crossing exists.  Colinear rays/lines count
    as a degenerate crossing at the ray origin (second element True)."""
    ux, uy = ray.direction
    vx, vy = line.direction
    qx = line.origin[0] - ray.origin[0]
    qy = line.origin[1] - ray.origin[1]
    denom = _cross(ux, uy, vx, vy)
    if abs(denom) <= TOL:
        if abs(_cross(qx, qy, ux, uy)) <= TOL:
            return (0.0, True)
        return None
    t = _cross(qx, qy, vx, vy) / denom
    if t < -TOL:
        return None
    return (max(t, 0.0), False)


def fov_overlap_heuristic(query: CameraPose, cand: CameraPose, cfg: OverlapConfig) -> OverlapVerdict:
    """Fast FOV-overlap check via boundary-ray crossings.

    Each of the query's boundary rays is intersected with the candidate's
    boundary lines; a crossing counts when it falls in front of the query
    camera with distance from the query origin inside [d_min, d_max].
    Candidate rays are treated as full lines so that pure forward
    translation (candidate dead ahead, same heading) is accepted; the query
    side is a proper half-line, which keeps back-to-back cameras rejected.

    In the default relaxed mode one in-range crossing from any pairing
    suffices.  With require_both, both crossings of the configured pairing
    must exist and be in range (the strict two-ray-pair rule; far lower
    recall against the sector oracle).

    Two sectors of radius d_max cannot intersect when their apexes are more
    than 2*d_max apart, so such pairs are rejected outright; this bound is
    what makes spatial-grid pruning in the memory store sound.

    Intentionally asymmetric in (query, cand): the distance filter is
    anchored at the query camera.
    """
    dx = cand.x - query.x
    dy = cand.y - query.y
    baseline = math.hypot(dx, dy)
    if baseline <= TOL:
        # Zero baseline: every ray pair meets at the shared origin, so fall
        # back to exact same-apex sector overlap and clamp the recorded
        # distance to d_min to avoid spurious self-rejection.
        if abs(wrap_angle(cand.yaw - query.yaw)) < (query.fov + cand.fov) / 2.0:
            d = max(cfg.d_min, 0.0)
            return OverlapVerdict(True, (((query.x, query.y), d),), RejectReason.DEGENERATE_ACCEPTED)
        return OverlapVerdict(False, (), RejectReason.NO_INTERSECTION)
    if baseline > 2.0 * cfg.d_max:
        return OverlapVerdict(False, (), RejectReason.TOO_FAR)

    pairs = _ray_pairs(query, cand, cfg.pairing)
    if cfg.require_both:
        pairs = pairs[:2]

    hits: list[tuple[tuple[float, float], float]] = []
    degenerate = False
    missed = False
    for q_ray, c_ray in pairs:
        hit = _ray_line_hit(q_ray, c_ray)
        if hit is None:
            missed = True
            continue
        t, degen = hit
        if degen:
            degenerate = True
            t = max(cfg.d_min, 0.0)
        hits.append((q_ray.point_at(t), t))

    if not hits or (cfg.require_both and missed):
        return OverlapVerdict(False, tuple(hits), RejectReason.NO_INTERSECTION)

    in_range = [h for h in hits if cfg.d_min <= h[1] <= cfg.d_max]
    ok = len(in_range) == len(hits) if cfg.require_both else bool(in_range)
    if not ok:
        dists = [d for _, d in hits]
        reason = RejectReason.TOO_NEAR if min(dists) < cfg.d_min else RejectReason.TOO_FAR
        return OverlapVerdict(False, tuple(hits), reason)
    return OverlapVerdict(
        True, tuple(in_range), RejectReason.DEGENERATE_ACCEPTED if degenerate else None
    )


def fov_overlap_batch(
    query: CameraPose,
    xs: np.ndarray,
    ys: np.ndarray,
    yaws: np.ndarray,
    fovs: np.ndarray,
    cfg: OverlapConfig,
) -> np.ndarray:
    """Vectorized fov_overlap_heuristic verdicts for one query against many
    candidate poses.  Must agree with the scalar version bit-for-bit on the
    boolean outcome (property-tested)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    yaws = np.asarray(yaws, dtype=float)
    fovs = np.asarray(fovs, dtype=float)
    n = xs.shape[0]
    if n == 0:
        return np.zeros(0, dtype=bool)

    dx = xs - query.x
    dy = ys - query.y
    baseline = np.hypot(dx, dy)
    zero_base = baseline <= TOL
    dyaw = np.remainder(yaws - query.yaw + np.pi, math.tau) - np.pi
    # wrap_angle maps -pi -> +pi; only |dyaw| matters here so abs() suffices
    zero_ok = np.abs(dyaw) < (query.fov + fovs) / 2.0

    half_q = query.fov / 2.0
    half_c = fovs / 2.0
    cross_pairs = [(query.yaw + half_q, yaws - half_c), (query.yaw - half_q, yaws + half_c)]
    same_pairs = [(query.yaw + half_q, yaws + half_c), (query.yaw - half_q, yaws - half_c)]
    if cfg.pairing is Pairing.CROSS_PAIR:
        pair_angles = cross_pairs + same_pairs
    else:
        pair_angles = same_pairs + cross_pairs
    if cfg.require_both:
        pair_angles = pair_angles[:2]

    all_hit = np.ones(n, dtype=bool)
    all_in_range = np.ones(n, dtype=bool)
    any_in_range = np.zeros(n, dtype=bool)
    for q_angle, c_angles in pair_angles:
        ux, uy = math.cos(q_angle), math.sin(q_angle)
        vx, vy = np.cos(c_angles), np.sin(c_angles)
        denom = ux * vy - uy * vx
        cross_qu = dx * uy - dy * ux
        parallel = np.abs(denom) <= TOL
        colinear = parallel & (np.abs(cross_qu) <= TOL)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(parallel, 0.0, (dx * vy - dy * vx) / np.where(parallel, 1.0, denom))
        t = np.where(colinear, max(cfg.d_min, 0.0), t)
        hit = colinear | (~parallel & (t >= -TOL))
        all_hit &= hit
        t = np.maximum(t, 0.0)
        in_range = hit & (t >= cfg.d_min) & (t <= cfg.d_max)
        any_in_range |= in_range
        all_in_range &= in_range

    ok = (all_hit & all_in_range) if cfg.require_both else any_in_range
    ok &= baseline <= 2.0 * cfg.d_max
    return np.where(zero_base, zero_ok, ok)


def _sector_samples(pose: CameraPose, d_max: float, n: int) -> np.ndarray:
    """Deterministic area-stratified sample points of a view sector."""
    n_r = max(4, math.isqrt(n))
    n_t = max(4, -(-n // n_r))
    radii = d_max * np.sqrt((np.arange(n_r) + 0.5) / n_r)
    angles = pose.yaw - pose.fov / 2.0 + (np.arange(n_t) + 0.5) / n_t * pose.fov
    rr, aa = np.meshgrid(radii, angles, indexing="ij")
    pts = np.empty((n_r * n_t, 2))
    pts[:, 0] = pose.x + (rr * np.cos(aa)).ravel()
    pts[:, 1] = pose.y + (rr * np.sin(aa)).ravel()
    return pts


def points_in_sector(points: np.ndarray, pose: CameraPose, d_max: float) -> np.ndarray:
    dx = points[..., 0] - pose.x
    dy = points[..., 1] - pose.y
    dist = np.hypot(dx, dy)
    # dot-product form of the bearing test; avoids arctan2 (hot path)
    heading_dot = dx * math.cos(pose.yaw) + dy * math.sin(pose.yaw)
    cos_half = math.cos(min(pose.fov / 2.0 + TOL, math.pi))
    return (dist <= d_max + TOL) & (heading_dot >= dist * cos_half)


def sector_overlap_fraction(a: CameraPose, b: CameraPose, cfg: OverlapConfig) -> tuple[float, float]:
    """(fraction of a's sector inside b, fraction of b's sector inside a)."""
    sa = _sector_samples(a, cfg.d_max, cfg.oracle_samples)
    sb = _sector_samples(b, cfg.d_max, cfg.oracle_samples)
    fa = float(np.mean(points_in_sector(sa, b, cfg.d_max)))
    fb = float(np.mean(points_in_sector(sb, a, cfg.d_max)))
    return fa, fb


def sector_oracle(a: CameraPose, b: CameraPose, cfg: OverlapConfig) -> bool:
    """Exact-by-sampling sector intersection test; symmetric by construction."""
    fa, fb = sector_overlap_fraction(a, b, cfg)
    return fa > 0.0 or fb > 0.0
