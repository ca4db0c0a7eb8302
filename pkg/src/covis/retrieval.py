"""Context-frame selection strategies over a frame store.

The full ladder runs: FOV filtering against the target pose, one random
representative per run of consecutive frames, and a few slots reserved for
frames far away in space or time.  Baselines (first frame, recent window,
exponential timestamps, random) are selectable for comparison.  The training
sampler draws a prediction segment and its context the same way, with a
small probability of using only the segment's first frame.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

from .geometry import CameraPose
from .memory_store import MemoryStore
from .trajectory import SEGMENT_LEN, Trajectory


class TrajectoryTooShort(Exception):
    """Trajectory cannot supply a prediction segment plus k context frames."""


class StrategyKind(Enum):
    FIRST_FRAME = "first-frame"
    FIRST_FRAME_PLUS_RANDOM = "first-frame-plus-random"
    RECENT_WINDOW = "recent-window"
    EXPONENTIAL_TIMESTAMPS = "exponential-timestamps"
    FOV_RANDOM = "fov-random"
    FOV_NONADJ = "fov-nonadj"
    FOV_NONADJ_FST = "fov-nonadj-fst"


@dataclass(frozen=True)
class RetrievalConfig:
    k: int = 20
    strategy: StrategyKind = StrategyKind.FOV_NONADJ_FST
    far_slots: int = 2
    time_scale: float = 1.0  # seconds that count as one meter in the far metric
    seed: int = 0
    recent_only_prob: float = 0.10  # training only
    far_from_all_history: bool = False  # widen far slots beyond FOV candidates

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not (0 <= self.far_slots < self.k):
            raise ValueError("far_slots must be in [0, k)")
        if self.time_scale <= 0:
            raise ValueError("time_scale must be positive")
        if not (0.0 <= self.recent_only_prob <= 1.0):
            raise ValueError("recent_only_prob must be in [0, 1]")


def _rng(seed: int, key: int) -> random.Random:
    return random.Random(f"{seed}:{key}")


def dedup_non_adjacent(ids: Sequence[int], seed: int) -> list[int]:
    """One uniformly random representative per maximal run of consecutive
    frame ids; output ascending."""
    ids = sorted(ids)
    if not ids:
        return []
    rng = _rng(seed, ids[0])
    out = []
    run_start = 0
    for i in range(1, len(ids) + 1):
        if i == len(ids) or ids[i] != ids[i - 1] + 1:
            out.append(ids[rng.randrange(run_start, i)])
            run_start = i
    return out


def _space_time_dist(
    store: MemoryStore, a: int, b: int, fps: int, time_scale: float
) -> float:
    ra, rb = store.records[a], store.records[b]
    spatial = math.hypot(ra.pose.x - rb.pose.x, ra.pose.y - rb.pose.y)
    temporal = abs(ra.time_index - rb.time_index) / (fps * time_scale)
    return spatial + temporal


def far_space_time_select(
    candidates: Sequence[int],
    store: MemoryStore,
    m: int,
    time_scale: float,
    seed: int,
    target: CameraPose,
    fps: int = 30,
) -> list[int]:
    """Greedy farthest-point sampling of m frames under the combined metric
    d = spatial distance + time delta / (fps * time_scale).  The first pick
    is the candidate farthest from the target pose; ties break by a seeded
    shuffle of the scan order."""
    cands = list(dict.fromkeys(candidates))
    if m <= 0 or not cands:
        return []
    rng = _rng(seed, len(cands))
    rng.shuffle(cands)

    def from_target(i: int) -> float:
        p = store.records[i].pose
        return math.hypot(p.x - target.x, p.y - target.y)

    picked = [max(cands, key=from_target)]
    while len(picked) < m and len(picked) < len(cands):
        best, best_d = None, -1.0
        for c in cands:
            if c in picked:
                continue
            d = min(
                _space_time_dist(store, c, p, fps, time_scale) for p in picked
            )
            if d > best_d:
                best, best_d = c, d
        picked.append(best)
    return sorted(picked)


def _fill(pool: list[int], have: set[int], budget: int, rng: random.Random) -> set[int]:
    """Add up to `budget` seeded-uniform picks from pool not already chosen."""
    extra = [i for i in pool if i not in have]
    rng.shuffle(extra)
    return have | set(extra[: max(0, budget)])


def _spread(pool: Sequence[int], have: set[int], budget: int, rng: random.Random) -> set[int]:
    """Fill with stratified picks from the sorted pool: one seeded uniform
    choice per contiguous stratum, the under-budget counterpart of
    non-adjacent dedup."""
    rest = sorted(i for i in pool if i not in have)
    if budget <= 0 or not rest:
        return set(have)
    if len(rest) <= budget:
        return have | set(rest)
    picks = set()
    for j in range(budget):
        lo = j * len(rest) // budget
        hi = (j + 1) * len(rest) // budget
        picks.add(rest[rng.randrange(lo, hi)])
    return have | picks


def retrieve_context(
    store: MemoryStore,
    target: CameraPose | Sequence[CameraPose],
    cfg: RetrievalConfig,
    most_recent_id: int,
    exclude: frozenset[int] = frozenset(),
    horizon: Optional[int] = None,
) -> list[int]:
    """Select <= k context frame ids for the target pose; always includes
    most_recent_id; result ascending; deterministic per (cfg.seed, target
    frame).

    `target` may be a single pose or the pose sequence of the upcoming
    segment; FOV candidates are frames overlapping any of them.  `horizon`
    is the largest frame id the query may see; it defaults to
    most_recent_id (inference: no future frames) and is widened by the
    training sampler, which instead excludes the prediction segment.
    """
    targets = [target] if isinstance(target, CameraPose) else list(target)
    if not targets:
        raise ValueError("need at least one target pose")
    if len(store) == 0:
        return []
    if not (0 <= most_recent_id < len(store)):
        raise ValueError(f"most_recent_id {most_recent_id} not in store")
    k = cfg.k
    horizon = most_recent_id if horizon is None else horizon
    rng = _rng(cfg.seed, most_recent_id)
    # history available to this query: nothing past the horizon, nothing
    # explicitly excluded (the training segment), never the recent frame twice
    allowed = lambda i: i <= horizon and i != most_recent_id and i not in exclude

    s = cfg.strategy
    if s is StrategyKind.FIRST_FRAME:
        chosen = {0} if allowed(0) else set()
    elif s is StrategyKind.FIRST_FRAME_PLUS_RANDOM:
        chosen = {0} if allowed(0) else set()
        pool = [i for i in range(horizon + 1) if allowed(i)]
        chosen = _fill(pool, chosen, k - 1 - len(chosen), rng)
    elif s is StrategyKind.RECENT_WINDOW:
        chosen = set()
        i = most_recent_id - 1
        while i >= 0 and len(chosen) < k - 1:
            if allowed(i):
                chosen.add(i)
            i -= 1
    elif s is StrategyKind.EXPONENTIAL_TIMESTAMPS:
        chosen = set()
        offset = 1
        while most_recent_id - offset >= 0 and len(chosen) < k - 1:
            i = most_recent_id - offset
            if allowed(i):
                chosen.add(i)
            offset *= 2
    else:
        passing: set[int] = set()
        for t in targets:
            passing.update(store.query_covisible(t))
        fov_pool = sorted(i for i in passing if allowed(i))
        if s is StrategyKind.FOV_RANDOM:
            chosen = _fill(fov_pool, set(), k - 1, rng)
        else:
            reps = dedup_non_adjacent(fov_pool, cfg.seed)
            far: list[int] = []
            if s is StrategyKind.FOV_NONADJ_FST and cfg.far_slots > 0:
                far_pool = (
                    [i for i in range(horizon + 1) if allowed(i)]
                    if cfg.far_from_all_history
                    else fov_pool
                )
                far = far_space_time_select(
                    far_pool, store, cfg.far_slots, cfg.time_scale, cfg.seed, targets[0]
                )
            chosen = set(far)
            budget = k - 1 - len(chosen)
            reps_left = [i for i in reps if i not in chosen]
            if len(reps_left) <= budget:
                chosen |= set(reps_left)
                # run representatives under budget: top up with stratified
                # picks from the full FOV-passing pool so the context stays
                # spread out rather than clustered
                chosen = _spread(fov_pool, chosen, k - 1 - len(chosen), rng)
            else:
                rng.shuffle(reps_left)
                chosen |= set(reps_left[:budget])
    chosen.add(most_recent_id)
    return sorted(chosen)


@dataclass
class TrainingSampler:
    """Draws (prediction segment, context) training pairs from a trajectory.

    The store and its co-visibility edges are built once at construction so
    repeated draws stay cheap.
    """

    trajectory: Trajectory
    cfg: RetrievalConfig
    store: MemoryStore = field(init=False)

    def __post_init__(self):
        seg = self.trajectory.segment_len
        if len(self.trajectory) < seg + self.cfg.k:
            raise TrajectoryTooShort(
                f"need >= {seg + self.cfg.k} frames, got {len(self.trajectory)}"
            )
        self.store = MemoryStore()
        for f in self.trajectory.frames:
            self.store.append_pose(f.pose, f.t)

    def sample(self, seed: int) -> tuple[range, list[int]]:
        seg = self.trajectory.segment_len
        n = len(self.trajectory)
        rng = random.Random(f"{self.cfg.seed}:{seed}")
        start = rng.randrange(0, n - seg + 1)
        segment = range(start, start + seg)
        first = segment[0]
        if rng.random() < self.cfg.recent_only_prob:
            return segment, [first]
        target = self.trajectory.frames[first].pose
        exclude = frozenset(segment)
        ids = retrieve_context(
            self.store,
            target,
            self.cfg,
            most_recent_id=first,
            exclude=exclude,
            horizon=n - 1,
        )
        chosen = set(ids)
        chosen.add(first)
        # training batches need a fixed context width: pad any shortfall
        # with seeded uniform picks from the remaining non-segment frames
        if len(chosen) < self.cfg.k:
            pool = [i for i in range(n) if i not in segment and i not in chosen]
            chosen = _fill(pool, chosen, self.cfg.k - len(chosen), rng)
        return segment, sorted(chosen)


def training_sample(
    trajectory: Trajectory, cfg: RetrievalConfig, seed: int
) -> tuple[range, list[int]]:
    """One-shot convenience wrapper around TrainingSampler."""
    return TrainingSampler(trajectory, cfg).sample(seed)
