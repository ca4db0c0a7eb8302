"""Retrieval-quality measurement against the exact world oracle.

Coverage (how much of the target's visible set the retrieved context also
sees) and precision/recall against oracle co-visibility stand in for
generation-quality metrics; no video model is involved, and every report
says so in its header.  Also houses the heuristic-vs-oracle calibration
sweep and the naive-vs-grid retrieval benchmark.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import jsonio
from .geometry import (
    CameraPose,
    OverlapConfig,
    fov_overlap_batch,
    sector_overlap_fraction,
)
from .memory_store import MemoryStore
from .retrieval import RetrievalConfig, StrategyKind, retrieve_context
from .trajectory import Trajectory
from .world import WorldModel, visible_set

PROXY_DISCLAIMER = (
    "Coverage and precision/recall are desk-scale proxies computed against an "
    "exact co-visibility oracle; they substitute for generation-quality "
    "metrics, which require a video model and are out of scope."
)


class _VisibleCache:
    """Memoizes visible_set per (world, pose); revisiting trajectories reuse
    poses heavily."""

    def __init__(self, world: WorldModel, cfg: OverlapConfig):
        self.world = world
        self.cfg = cfg
        self._cache: dict[CameraPose, frozenset[int]] = {}

    def get(self, pose: CameraPose) -> frozenset[int]:
        hit = self._cache.get(pose)
        if hit is None:
            hit = frozenset(visible_set(self.world, pose, self.cfg))
            self._cache[pose] = hit
        return hit


def coverage(
    world: WorldModel,
    target_pose: CameraPose,
    context_ids: Sequence[int],
    store: MemoryStore,
    cfg: OverlapConfig,
    cache: Optional[_VisibleCache] = None,
) -> float:
    """Fraction of the target's visible landmarks also visible from at least
    one context frame; 1.0 when the target sees nothing."""
    cache = cache or _VisibleCache(world, cfg)
    target_vis = cache.get(target_pose)
    if not target_vis:
        return 1.0
    union: set[int] = set()
    for i in context_ids:
        union |= cache.get(store.records[i].pose)
    return len(target_vis & union) / len(target_vis)


def retrieval_pr(
    store: MemoryStore,
    world: WorldModel,
    target: CameraPose,
    returned_ids: Sequence[int],
    cfg: OverlapConfig,
    cache: Optional[_VisibleCache] = None,
    candidate_ids: Optional[Sequence[int]] = None,
) -> tuple[float, float]:
    """Precision and recall of returned_ids against the oracle-relevant set
    (frames sharing at least one visible landmark with the target).  The
    relevant universe defaults to the whole store; pass candidate_ids to
    measure against a pre-budget pool instead.  Empty denominators give 1.0.
    """
    cache = cache or _VisibleCache(world, cfg)
    universe = range(len(store)) if candidate_ids is None else candidate_ids
    target_vis = cache.get(target)
    relevant = {i for i in universe if target_vis & cache.get(store.records[i].pose)}
    returned = set(returned_ids)
    tp = len(returned & relevant)
    precision = tp / len(returned) if returned else 1.0
    recall = tp / len(relevant) if relevant else 1.0
    return precision, recall


@dataclass(frozen=True)
class StrategyResult:
    strategy: str
    mean_coverage: float
    p10_coverage: float
    mean_precision: float
    mean_recall: float
    mean_context_size: float
    mean_query_latency_s: float
    segments_evaluated: int


@dataclass(frozen=True)
class EvalReport:
    disclaimer: str
    seeds: tuple[int, ...]
    config: dict
    strategies: tuple[StrategyResult, ...]

    def by_strategy(self) -> dict[str, StrategyResult]:
        return {r.strategy: r for r in self.strategies}

    def to_json(self, include_timings: bool = False) -> str:
        """Canonical report JSON; wall-clock latencies are excluded unless
        asked for so the report is byte-for-byte reproducible per seed."""
        strategies = []
        for r in self.strategies:
            doc = {
                "strategy": r.strategy,
                "mean_coverage": r.mean_coverage,
                "p10_coverage": r.p10_coverage,
                "mean_precision": r.mean_precision,
                "mean_recall": r.mean_recall,
                "mean_context_size": r.mean_context_size,
                "segments_evaluated": r.segments_evaluated,
            }
            if include_timings:
                doc["mean_query_latency_s"] = r.mean_query_latency_s
            strategies.append(doc)
        return jsonio.dumps17(
            {
                "disclaimer": self.disclaimer,
                "seeds": list(self.seeds),
                "config": self.config,
                "strategies": strategies,
            }
        )

    def to_table(self) -> str:
        head = f"# {self.disclaimer}"
        cols = ["strategy", "cov_mean", "cov_p10", "prec", "recall", "ctx", "latency_ms"]
        lines = [head, "  ".join(f"{c:>12}" for c in cols)]
        for r in self.strategies:
            lines.append(
                "  ".join(
                    [
                        f"{r.strategy:>12}",
                        f"{r.mean_coverage:12.4f}",
                        f"{r.p10_coverage:12.4f}",
                        f"{r.mean_precision:12.4f}",
                        f"{r.mean_recall:12.4f}",
                        f"{r.mean_context_size:12.2f}",
                        f"{r.mean_query_latency_s * 1e3:12.3f}",
                    ]
                )
            )
        return "\n".join(lines)


def _simulate_streaming(
    world: WorldModel,
    traj: Trajectory,
    strategy: StrategyKind,
    rcfg: RetrievalConfig,
    ocfg: OverlapConfig,
    cache: _VisibleCache,
    coverage_stride: int = 7,
) -> tuple[list[float], list[float], list[float], list[int], list[float]]:
    """Segment-by-segment generation loop: retrieve context for the next
    segment, score coverage of its frames against that context, append the
    segment.  Returns per-segment coverage plus PR/size/latency series."""
    from dataclasses import replace

    rcfg = replace(rcfg, strategy=strategy)
    store = MemoryStore(ocfg, track_edges=False)
    seg = traj.segment_len
    covs: list[float] = []
    precs: list[float] = []
    recs: list[float] = []
    sizes: list[int] = []
    lats: list[float] = []
    for s in range(traj.num_segments()):
        frames = traj.frames[s * seg : (s + 1) * seg]
        if s > 0:
            # FOV candidates are matched against the whole upcoming segment,
            # the same pose sequence the generation loop conditions on
            targets = [f.pose for f in frames[::coverage_stride]]
            most_recent = len(store) - 1
            t0 = time.perf_counter()
            ids = retrieve_context(store, targets, rcfg, most_recent)
            lats.append(time.perf_counter() - t0)
            sizes.append(len(ids))
            p, r = retrieval_pr(store, world, frames[0].pose, ids, ocfg, cache)
            precs.append(p)
            recs.append(r)
            union: set[int] = set()
            for i in ids:
                union |= cache.get(store.records[i].pose)
            seg_covs = []
            for f in frames[::coverage_stride]:
                vis = cache.get(f.pose)
                seg_covs.append(len(vis & union) / len(vis) if vis else 1.0)
            covs.append(float(np.mean(seg_covs)))
        for f in frames:
            store.append_pose(f.pose, f.t)
    return covs, precs, recs, sizes, lats


def compare_strategies(
    worlds: Sequence[WorldModel],
    trajectories: Sequence[Trajectory],
    strategies: Sequence[StrategyKind],
    rcfg: RetrievalConfig,
    ocfg: Optional[OverlapConfig] = None,
    coverage_stride: int = 7,
) -> EvalReport:
    """Run the streaming loop for every (world, trajectory, strategy) triple
    and aggregate mean / 10th-percentile coverage per strategy."""
    if not worlds or not trajectories:
        raise ValueError("need at least one world and one trajectory")
    ocfg = ocfg or OverlapConfig()
    caches = [_VisibleCache(w, ocfg) for w in worlds]
    results = []
    for strategy in strategies:
        covs: list[float] = []
        precs: list[float] = []
        recs: list[float] = []
        sizes: list[int] = []
        lats: list[float] = []
        for world, cache in zip(worlds, caches):
            for traj in trajectories:
                c, p, r, n, l = _simulate_streaming(
                    world, traj, strategy, rcfg, ocfg, cache, coverage_stride
                )
                covs += c
                precs += p
                recs += r
                sizes += n
                lats += l
        results.append(
            StrategyResult(
                strategy=strategy.value,
                mean_coverage=float(np.mean(covs)) if covs else 1.0,
                p10_coverage=float(np.percentile(covs, 10)) if covs else 1.0,
                mean_precision=float(np.mean(precs)) if precs else 1.0,
                mean_recall=float(np.mean(recs)) if recs else 1.0,
                mean_context_size=float(np.mean(sizes)) if sizes else 0.0,
                mean_query_latency_s=float(np.mean(lats)) if lats else 0.0,
                segments_evaluated=len(covs),
            )
        )
    config = {
        "k": rcfg.k,
        "far_slots": rcfg.far_slots,
        "time_scale": rcfg.time_scale,
        "d_min": ocfg.d_min,
        "d_max": ocfg.d_max,
        "coverage_stride": coverage_stride,
        "worlds": [w.seed for w in worlds],
        "trajectory_lengths": [len(t) for t in trajectories],
    }
    return EvalReport(
        PROXY_DISCLAIMER, (rcfg.seed,), config, tuple(results)
    )


# -- heuristic-vs-oracle calibration ----------------------------------------


@dataclass(frozen=True)
class CalibrationReport:
    pairs_kept: int
    agreements: int
    disagreements_by_reason: dict
    agreement_rate: float
    elapsed_s: float
    seed: int

    def to_json(self) -> str:
        return jsonio.dumps17(
            {
                "disclaimer": PROXY_DISCLAIMER,
                "pairs_kept": self.pairs_kept,
                "agreements": self.agreements,
                "disagreements_by_reason": self.disagreements_by_reason,
                "agreement_rate": self.agreement_rate,
                "elapsed_s": self.elapsed_s,
                "seed": self.seed,
            }
        )


def calibration_run(
    n_pairs: int,
    cfg: Optional[OverlapConfig] = None,
    seed: int = 0,
    min_overlap_fraction: float = 0.05,
    extent: float = 30.0,
) -> CalibrationReport:
    """Sample random unoccluded pose pairs until n_pairs have sector overlap
    of at least min_overlap_fraction of a sector, then score the heuristic's
    agreement with the oracle on those pairs.

    Kept pairs genuinely overlap, so agreement here is the heuristic's
    acceptance rate and every disagreement is a rejection with a reason.
    """
    from .geometry import fov_overlap_heuristic

    cfg = cfg or OverlapConfig()
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    kept = 0
    agree = 0
    by_reason: dict[str, int] = {}
    while kept < n_pairs:
        batch = min(4096, (n_pairs - kept) * 4 + 256)
        xs = rng.uniform(0, extent, (batch, 2, 2))
        yaws = rng.uniform(-math.pi, math.pi, (batch, 2))
        for b in range(batch):
            if kept >= n_pairs:
                break
            # sectors of radius d_max cannot overlap past a 2*d_max baseline
            if math.hypot(
                xs[b, 1, 0] - xs[b, 0, 0], xs[b, 1, 1] - xs[b, 0, 1]
            ) > 2.0 * cfg.d_max:
                continue
            a = CameraPose(float(xs[b, 0, 0]), float(xs[b, 0, 1]), float(yaws[b, 0]))
            c = CameraPose(float(xs[b, 1, 0]), float(xs[b, 1, 1]), float(yaws[b, 1]))
            fa, fb = sector_overlap_fraction(a, c, cfg)
            if max(fa, fb) < min_overlap_fraction:
                continue
            kept += 1
            verdict = fov_overlap_heuristic(a, c, cfg)
            if verdict.overlaps:
                agree += 1
            else:
                reason = verdict.reject_reason.value
                by_reason[reason] = by_reason.get(reason, 0) + 1
    elapsed = time.perf_counter() - t0
    return CalibrationReport(
        pairs_kept=kept,
        agreements=agree,
        disagreements_by_reason=by_reason,
        agreement_rate=agree / kept if kept else 1.0,
        elapsed_s=elapsed,
        seed=seed,
    )


# -- naive vs grid benchmark -------------------------------------------------


@dataclass(frozen=True)
class BenchReport:
    n_frames: int
    build_s: float
    build_evals: int
    naive_pair_count: int
    grid_query_s: float
    naive_query_s: float
    queries: int
    results_equal: bool
    speedup: float

    def to_json(self) -> str:
        return jsonio.dumps17(
            {
                "n_frames": self.n_frames,
                "build_s": self.build_s,
                "build_evals": self.build_evals,
                "naive_pair_count": self.naive_pair_count,
                "grid_query_s": self.grid_query_s,
                "naive_query_s": self.naive_query_s,
                "queries": self.queries,
                "results_equal": self.results_equal,
                "speedup": self.speedup,
            }
        )


def bench_retrieval(
    n_frames: int,
    cfg: Optional[OverlapConfig] = None,
    seed: int = 0,
    extent: float = 200.0,
    queries: int = 1000,
) -> BenchReport:
    """Time covis-graph build plus grid vs naive queries on uniform random
    poses; asserts result-set equality on every query it times."""
    if n_frames < 100:
        raise ValueError("n_frames must be >= 100")
    cfg = cfg or OverlapConfig()
    rng = np.random.default_rng(seed)
    poses = [
        CameraPose(
            float(rng.uniform(0, extent)),
            float(rng.uniform(0, extent)),
            float(rng.uniform(-math.pi, math.pi)),
        )
        for _ in range(n_frames)
    ]
    store = MemoryStore(cfg)
    t0 = time.perf_counter()
    for i, p in enumerate(poses):
        store.append_pose(p, i)
    build_s = time.perf_counter() - t0
    build_evals = store.heuristic_evals

    targets = [
        CameraPose(
            float(rng.uniform(0, extent)),
            float(rng.uniform(0, extent)),
            float(rng.uniform(-math.pi, math.pi)),
        )
        for _ in range(queries)
    ]
    t0 = time.perf_counter()
    grid_results = [store.query_covisible(t) for t in targets]
    grid_s = time.perf_counter() - t0
    t0 = time.perf_counter()
    naive_results = [store.naive_query_covisible(t) for t in targets]
    naive_s = time.perf_counter() - t0
    return BenchReport(
        n_frames=n_frames,
        build_s=build_s,
        build_evals=build_evals,
        naive_pair_count=n_frames * (n_frames - 1) // 2,
        grid_query_s=grid_s,
        naive_query_s=naive_s,
        queries=queries,
        results_equal=grid_results == naive_results,
        speedup=naive_s / grid_s if grid_s > 0 else float("inf"),
    )
