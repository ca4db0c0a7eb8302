"""Camera trajectory generation and validation.

Roaming paths are cubic B-splines through randomly walked control points,
arc-length reparameterized to constant speed so that every 77-frame segment
moves between 3 and 6 meters with bounded yaw change.  Scripted
rotate-and-return sweeps are the revisit fixtures used for evaluation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.interpolate import make_interp_spline

from . import jsonio
from .geometry import DEFAULT_FOV, CameraPose, wrap_angle

SEGMENT_LEN = 77
FPS = 30
CAMERA_HEIGHT_M = 1.6  # fixed z; poses are planar


class ConstraintUnsatisfiable(Exception):
    """Raised when no control-point sample satisfies the roam constraints."""


@dataclass(frozen=True)
class TrajectoryFrame:
    t: int
    pose: CameraPose


@dataclass(frozen=True)
class Trajectory:
    frames: tuple[TrajectoryFrame, ...]
    segment_len: int = SEGMENT_LEN
    fps: int = FPS
    seed: Optional[int] = None

    def __post_init__(self):
        ts = [f.t for f in self.frames]
        if ts and (ts[0] != 0 or any(b <= a for a, b in zip(ts, ts[1:]))):
            raise ValueError("time indices must start at 0 and strictly increase")

    def __len__(self) -> int:
        return len(self.frames)

    def poses(self) -> list[CameraPose]:
        return [f.pose for f in self.frames]

    def num_segments(self) -> int:
        return len(self.frames) // self.segment_len


@dataclass(frozen=True)
class RoamSpec:
    num_frames: int
    bounds: tuple[float, float, float, float]  # x_min, y_min, x_max, y_max
    num_control_points: int = 12
    seed: int = 0
    target_segment_distance: float = 4.5  # meters of travel per segment
    fov: float = DEFAULT_FOV
    max_attempts: int = 200

    def __post_init__(self):
        x0, y0, x1, y1 = self.bounds
        if self.num_frames < SEGMENT_LEN:
            raise ValueError(f"num_frames must be >= {SEGMENT_LEN}")
        if x1 <= x0 or y1 <= y0:
            raise ValueError("bounds must be a non-degenerate rectangle")
        if self.num_control_points < 4:
            raise ValueError("need at least 4 control points for a cubic spline")


@dataclass(frozen=True)
class SegmentReport:
    index: int
    start_frame: int
    end_frame: int
    displacement: float
    net_yaw_deg: float
    cum_yaw_deg: float
    passed: bool


@dataclass(frozen=True)
class ConstraintReport:
    segments: tuple[SegmentReport, ...]
    min_displacement: float
    max_displacement: float
    max_net_yaw_deg: float
    max_cum_yaw_deg: float

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.segments)


def check_constraints(
    traj: Trajectory,
    min_displacement: float = 3.0,
    max_displacement: float = 6.0,
    max_net_yaw_deg: float = 60.0,
    max_cum_yaw_deg: float = 90.0,
) -> ConstraintReport:
    """Per-segment displacement and yaw-change audit over non-overlapping
    segments; a segment passes when its start-to-end displacement is in
    [3, 6] m, net yaw change is under 60 degrees, and cumulative yaw change
    stays under the (configurable) 90-degree cap."""
    if not traj.frames:
        raise ValueError("empty trajectory")
    seg = traj.segment_len
    poses = traj.poses()
    reports = []
    for i in range(len(poses) // seg):
        chunk = poses[i * seg : (i + 1) * seg]
        disp = math.hypot(chunk[-1].x - chunk[0].x, chunk[-1].y - chunk[0].y)
        deltas = [wrap_angle(b.yaw - a.yaw) for a, b in zip(chunk, chunk[1:])]
        net = abs(math.degrees(sum(deltas)))
        cum = math.degrees(sum(abs(d) for d in deltas))
        ok = (
            min_displacement <= disp <= max_displacement
            and net < max_net_yaw_deg
            and cum < max_cum_yaw_deg
        )
        reports.append(
            SegmentReport(i, i * seg, (i + 1) * seg - 1, disp, net, cum, ok)
        )
    return ConstraintReport(
        tuple(reports), min_displacement, max_displacement, max_net_yaw_deg, max_cum_yaw_deg
    )


def _smooth_headings(headings: np.ndarray, window: int = 15) -> np.ndarray:
    """Moving average over unwrapped headings; keeps per-segment yaw change
    within the roam limits without distorting the overall sweep."""
    unwrapped = np.unwrap(headings)
    if window <= 1 or unwrapped.size < window:
        return unwrapped
    pad = window // 2
    padded = np.pad(unwrapped, pad, mode="edge")
    kernel = np.ones(window) / window
    return np.convolve(padded, kernel, mode="valid")


def roam_from_control_points(
    points: np.ndarray,
    num_frames: int,
    segment_len: int = SEGMENT_LEN,
    target_segment_distance: float = 4.5,
    fov: float = DEFAULT_FOV,
    seed: Optional[int] = None,
) -> Optional[Trajectory]:
    """Constant-speed traversal of a cubic B-spline through `points`.

    Returns None when the spline is too short for the requested travel
    distance (caller retries with fresh control points).
    """
    points = np.asarray(points, dtype=float)
    if points.shape[0] < 4:
        raise ValueError("need at least 4 control points")
    u = np.linspace(0.0, 1.0, points.shape[0])
    spline = make_interp_spline(u, points, k=3)
    dense_u = np.linspace(0.0, 1.0, max(64 * points.shape[0], 512))
    dense_xy = spline(dense_u)
    steps = np.hypot(np.diff(dense_xy[:, 0]), np.diff(dense_xy[:, 1]))
    arc = np.concatenate([[0.0], np.cumsum(steps)])

    step = target_segment_distance / (segment_len - 1)
    total = step * (num_frames - 1)
    if arc[-1] < total:
        return None

    s_targets = np.linspace(0.0, total, num_frames)
    u_of_s = np.interp(s_targets, arc, dense_u)
    xy = spline(u_of_s)
    deriv = spline.derivative()(u_of_s)
    headings = _smooth_headings(np.arctan2(deriv[:, 1], deriv[:, 0]))
    frames = tuple(
        TrajectoryFrame(i, CameraPose(float(xy[i, 0]), float(xy[i, 1]), float(headings[i]), fov))
        for i in range(num_frames)
    )
    return Trajectory(frames, segment_len=segment_len, seed=seed)


def _walk_control_points(rng: np.random.Generator, spec: RoamSpec) -> np.ndarray:
    """Correlated random walk inside the bounds: long strides, bounded
    turning, reflected at the walls.  Keeps the spline smooth enough for the
    per-segment yaw limit while covering the requested travel distance."""
    x0, y0, x1, y1 = spec.bounds
    margin = min(2.0, (x1 - x0) / 10, (y1 - y0) / 10)
    pts = np.empty((spec.num_control_points, 2))
    pts[0] = (rng.uniform(x0 + margin, x1 - margin), rng.uniform(y0 + margin, y1 - margin))
    heading = rng.uniform(-math.pi, math.pi)
    for i in range(1, spec.num_control_points):
        heading += rng.uniform(-math.radians(40), math.radians(40))
        stride = rng.uniform(6.0, 9.0)
        nxt = pts[i - 1] + stride * np.array([math.cos(heading), math.sin(heading)])
        # reflect into bounds and realign the heading with the reflection
        if not (x0 + margin <= nxt[0] <= x1 - margin):
            heading = math.pi - heading
            nxt[0] = np.clip(nxt[0], x0 + margin, x1 - margin)
        if not (y0 + margin <= nxt[1] <= y1 - margin):
            heading = -heading
            nxt[1] = np.clip(nxt[1], y0 + margin, y1 - margin)
        pts[i] = nxt
    return pts


def generate_roam(spec: RoamSpec) -> Trajectory:
    """Seed-deterministic roaming trajectory satisfying the segment
    constraints; retries control-point sampling up to spec.max_attempts."""
    rng = np.random.default_rng(spec.seed)
    for _ in range(spec.max_attempts):
        pts = _walk_control_points(rng, spec)
        traj = roam_from_control_points(
            pts,
            spec.num_frames,
            target_segment_distance=spec.target_segment_distance,
            fov=spec.fov,
            seed=spec.seed,
        )
        if traj is not None and check_constraints(traj).passed:
            return traj
    raise ConstraintUnsatisfiable(
        f"no valid roam after {spec.max_attempts} attempts (bounds too tight?)"
    )


def rotate_and_return(start: CameraPose, degrees: float, num_frames: int) -> Trajectory:
    """Yaw sweeps linearly to start.yaw + degrees over the first half and
    back over the second; position fixed; the final pose equals `start`."""
    if num_frames < 2 or num_frames % 2 != 0:
        raise ValueError("num_frames must be even and >= 2")
    sweep = math.radians(degrees)
    mid = num_frames // 2
    frames = []
    for i in range(num_frames):
        if i == num_frames - 1:
            pose = start
        elif i <= mid:
            pose = CameraPose(start.x, start.y, start.yaw + sweep * i / mid, start.fov)
        else:
            pose = CameraPose(
                start.x,
                start.y,
                start.yaw + sweep * (num_frames - 1 - i) / (num_frames - 1 - mid),
                start.fov,
            )
        frames.append(TrajectoryFrame(i, pose))
    return Trajectory(tuple(frames))


def loop_roam(
    center: tuple[float, float],
    radius: float,
    num_frames: int,
    laps: float = 1.0,
    fov: float = DEFAULT_FOV,
) -> Trajectory:
    """Circular roam that revisits its own path; camera faces its tangent."""
    frames = []
    for i in range(num_frames):
        ang = math.tau * laps * i / (num_frames - 1)
        x = center[0] + radius * math.cos(ang)
        y = center[1] + radius * math.sin(ang)
        frames.append(TrajectoryFrame(i, CameraPose(x, y, ang + math.pi / 2, fov)))
    return Trajectory(tuple(frames))


def save_trajectory(traj: Trajectory, path: str | Path) -> None:
    lines = [
        jsonio.dumps17({"fps": traj.fps, "segment_len": traj.segment_len, "seed": traj.seed})
    ]
    for f in traj.frames:
        lines.append(
            jsonio.dumps17(
                {"t": f.t, "x": f.pose.x, "y": f.pose.y, "yaw": f.pose.yaw, "fov": f.pose.fov}
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def load_trajectory(path: str | Path) -> Trajectory:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty trajectory file")
    header = jsonio.loads(lines[0])
    frames = []
    for line in lines[1:]:
        rec = jsonio.loads(line)
        frames.append(
            TrajectoryFrame(rec["t"], CameraPose(rec["x"], rec["y"], rec["yaw"], rec["fov"]))
        )
    return Trajectory(
        tuple(frames),
        segment_len=header["segment_len"],
        fps=header["fps"],
        seed=header["seed"],
    )
