"""End-to-end acceptance gate.

Each test covers one shipping criterion and prints a single PASS/FAIL line
with the measured numbers (visible even under pytest capture), then asserts.
Ordering results on the evaluation fixtures are asserted on fixed seeds, not
claimed universally.
"""
import math
import time

import numpy as np
import pytest

from covis.conditioning import assemble_batch
from covis.eval_harness import bench_retrieval, calibration_run, compare_strategies
from covis.geometry import (
    CameraPose,
    OverlapConfig,
    RejectReason,
    fov_overlap_heuristic,
    sector_overlap_fraction,
)
from covis.memory_store import MemoryStore, load as load_store
from covis.retrieval import (
    RetrievalConfig,
    StrategyKind,
    TrainingSampler,
    dedup_non_adjacent,
    retrieve_context,
)
from covis.trajectory import (
    SEGMENT_LEN,
    RoamSpec,
    check_constraints,
    generate_roam,
    load_trajectory,
    loop_roam,
    rotate_and_return,
    save_trajectory,
)
from covis.world import generate_world


def _report(capsys, label: str, ok: bool, detail: str):
    with capsys.disabled():
        print(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
    assert ok, f"{label}: {detail}"


# ---------------------------------------------------------------- criterion 1
def test_criterion_01_calibration(capsys):
    """>=90% heuristic/oracle agreement on 10,000 overlapping pairs, <10 s,
    every disagreement carries a reject reason."""
    t0 = time.perf_counter()
    rep = calibration_run(10_000, OverlapConfig(oracle_samples=1024), seed=0)
    elapsed = time.perf_counter() - t0
    reasons_ok = sum(rep.disagreements_by_reason.values()) == rep.pairs_kept - rep.agreements
    ok = rep.agreement_rate >= 0.90 and elapsed < 10.0 and reasons_ok
    _report(
        capsys,
        "calibration",
        ok,
        f"agreement={rep.agreement_rate:.4f} on {rep.pairs_kept} pairs in "
        f"{elapsed:.1f}s, disagreements={rep.disagreements_by_reason}",
    )


# ---------------------------------------------------------------- criterion 2
def test_criterion_02_fixture_pairs(capsys):
    """Six hand-constructed pose pairs: two accepts, a far reject, a near
    reject, and two known heuristic/oracle disagreements."""
    cfg = OverlapConfig()
    q = CameraPose(0.0, 0.0, 0.0)
    cases = {
        "a": (CameraPose(5.0, 2.0, math.radians(-100)), True, None),
        "b": (CameraPose(10.0, 0.0, math.pi), True, None),
        "c": (CameraPose(100.0, 0.0, math.pi), False, RejectReason.TOO_FAR),
        "d": (CameraPose(0.1, 0.0, math.pi), False, RejectReason.TOO_NEAR),
        "e": (CameraPose(-5.0, 0.0, 0.0), False, RejectReason.NO_INTERSECTION),
        "f": (CameraPose(39.0, 0.0, math.pi), False, RejectReason.TOO_FAR),
    }
    failures = []
    for name, (cand, want_accept, want_reason) in cases.items():
        v = fov_overlap_heuristic(q, cand, cfg)
        if v.overlaps != want_accept or v.reject_reason != want_reason:
            failures.append(f"{name}: got {v.overlaps}/{v.reject_reason}")
    # (e) and (f) are rejected by the heuristic although the sectors truly
    # intersect -- the documented corner cases
    for name in ("e", "f"):
        fa, fb = sector_overlap_fraction(q, cases[name][0], cfg)
        if max(fa, fb) <= 0.0:
            failures.append(f"{name}: oracle saw no overlap, not a disagreement")
    _report(
        capsys,
        "fixture-pairs",
        not failures,
        "6/6 verdicts exact, (e),(f) confirmed heuristic/oracle disagreements"
        if not failures
        else "; ".join(failures),
    )


# ---------------------------------------------------------------- criterion 3
def test_criterion_03_brute_force_equivalence(capsys):
    """Grid-pruned queries and covis edges equal naive all-pairs on 50 seeded
    random stores of <=2,000 frames, <60 s total."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    total = 0
    mismatches = 0
    for s in range(50):
        n = int(rng.integers(100, 2001))
        r2 = np.random.default_rng(1000 + s)
        store = MemoryStore()
        for i in range(n):
            store.append_pose(
                CameraPose(
                    float(r2.uniform(0, 150)),
                    float(r2.uniform(0, 150)),
                    float(r2.uniform(-math.pi, math.pi)),
                ),
                i,
            )
        if store.covis_edges != store.naive_covis_edges():
            mismatches += 1
        total += n
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 60.0
    _report(
        capsys,
        "brute-force-equivalence",
        ok,
        f"50 stores / {total} frames, {mismatches} mismatches, {elapsed:.1f}s",
    )


# ---------------------------------------------------------------- criterion 4
def test_criterion_04_retrieval_invariants(capsys):
    """1,000 seeded retrievals across all strategies: size bound, most-recent
    inclusion, heuristic-passing FOV results, non-adjacent dedup, determinism."""
    traj = generate_roam(RoamSpec(462, (0.0, 0.0, 60.0, 60.0), 8, seed=21))
    store = MemoryStore()
    for f in traj.frames:
        store.append_pose(f.pose, f.t)
    fov_kinds = {
        StrategyKind.FOV_RANDOM,
        StrategyKind.FOV_NONADJ,
        StrategyKind.FOV_NONADJ_FST,
    }
    violations = []
    runs = 0
    rng = np.random.default_rng(7)
    while runs < 1_000:
        for kind in StrategyKind:
            if runs >= 1_000:
                break
            mrid = int(rng.integers(1, len(store)))
            cfg = RetrievalConfig(k=20, strategy=kind, seed=runs % 17)
            target = store.records[mrid].pose
            ids = retrieve_context(store, target, cfg, most_recent_id=mrid)
            runs += 1
            if len(ids) > 20:
                violations.append(f"{kind.value}: |context|={len(ids)}")
            if mrid not in ids:
                violations.append(f"{kind.value}: most-recent missing")
            if ids != retrieve_context(store, target, cfg, most_recent_id=mrid):
                violations.append(f"{kind.value}: nondeterministic")
            if kind in fov_kinds:
                passing = set(store.query_covisible(target))
                bad = [i for i in ids if i != mrid and i not in passing]
                if bad:
                    violations.append(f"{kind.value}: non-passing ids {bad}")
    r2 = np.random.default_rng(3)
    for trial in range(200):
        ids = sorted(set(r2.integers(0, 400, size=r2.integers(1, 60)).tolist()))
        reps = dedup_non_adjacent(ids, seed=trial)
        if any(b == a + 1 for a, b in zip(reps, reps[1:])):
            violations.append(f"dedup consecutive at trial {trial}")
    ok = not violations
    _report(
        capsys,
        "retrieval-invariants",
        ok,
        f"{runs} retrievals + 200 dedup trials, {len(violations)} violations"
        + ("" if ok else f": {violations[:3]}"),
    )


# ---------------------------------------------------------------- criterion 5
def test_criterion_05_sampling_conformance(capsys):
    """Training draws: exactly k frames incl. the segment's first frame in the
    main branch, exactly 1 frame in the ~10% branch (10% +/- 1% over 10,000
    draws); the streaming loop appends every generated segment's frames."""
    traj = generate_roam(RoamSpec(462, (0.0, 0.0, 60.0, 60.0), 8, seed=21))
    sampler = TrainingSampler(traj, RetrievalConfig(k=20, seed=5))
    single = 0
    bad = 0
    n_draws = 10_000
    for i in range(n_draws):
        segment, ctx = sampler.sample(i)
        if len(ctx) == 1:
            single += 1
            if ctx != [segment[0]]:
                bad += 1
        else:
            if len(ctx) != 20 or segment[0] not in ctx:
                bad += 1
            if any(j in segment for j in ctx if j != segment[0]):
                bad += 1
    freq = single / n_draws
    # streaming loop: context for the upcoming segment, then append all of it
    store = MemoryStore()
    for f in traj.frames[:SEGMENT_LEN]:
        store.append_pose(f.pose, f.t)
    append_ok = True
    cfg = RetrievalConfig(k=20, seed=5)
    for seg_start in range(SEGMENT_LEN, len(traj) - SEGMENT_LEN + 1, SEGMENT_LEN):
        before = len(store)
        targets = [traj.frames[j].pose for j in range(seg_start, seg_start + SEGMENT_LEN)]
        retrieve_context(store, targets, cfg, most_recent_id=before - 1)
        for j in range(seg_start, seg_start + SEGMENT_LEN):
            store.append_pose(traj.frames[j].pose, traj.frames[j].t)
        append_ok &= len(store) == before + SEGMENT_LEN
    append_ok &= len(store) == (len(traj) // SEGMENT_LEN) * SEGMENT_LEN
    ok = bad == 0 and 0.09 <= freq <= 0.11 and append_ok
    _report(
        capsys,
        "sampling-conformance",
        ok,
        f"single-frame branch {freq:.4f} over {n_draws} draws, "
        f"{bad} malformed contexts, streaming appends {'ok' if append_ok else 'broken'}",
    )


# ----------------------------------------------------- fixtures for 6 and 7
@pytest.fixture(scope="module")
def ordering_report():
    worlds = [generate_world(2.0, 0, (0.0, 0.0, 40.0, 40.0), seed=s) for s in range(5)]
    trajectories = [
        rotate_and_return(CameraPose(20.0, 20.0, 0.0), 180.0, 308),
        rotate_and_return(CameraPose(20.0, 20.0, 0.0), 360.0, 154),
        loop_roam((20.0, 20.0), 8.0, 231, laps=3.0),
    ]
    t0 = time.perf_counter()
    rep = compare_strategies(
        worlds, trajectories, list(StrategyKind), RetrievalConfig(k=20, seed=13)
    )
    return rep, time.perf_counter() - t0


# ---------------------------------------------------------------- criterion 6
def test_criterion_06_strategy_ordering(capsys, ordering_report):
    """Mean-coverage ordering of the strategy ladder on the revisiting
    fixtures, with the FOV ladder clearing the recent window by >=0.15."""
    rep, elapsed = ordering_report
    cov = {r.strategy: r.mean_coverage for r in rep.strategies}
    ladder = [
        "fov-nonadj-fst",
        "fov-nonadj",
        "fov-random",
        "first-frame-plus-random",
        "recent-window",
    ]
    ordered = cov["fov-nonadj-fst"] >= cov["fov-nonadj"] and all(
        cov[a] > cov[b] for a, b in zip(ladder[1:], ladder[2:])
    )
    margin = cov["fov-nonadj"] - cov["recent-window"]
    ok = ordered and margin >= 0.15 and elapsed < 300.0
    _report(
        capsys,
        "strategy-ordering",
        ok,
        " > ".join(f"{s}={cov[s]:.4f}" for s in ladder)
        + f", fov-nonadj - recent-window = {margin:.3f}, {elapsed:.1f}s",
    )


# ---------------------------------------------------------------- criterion 7
def test_criterion_07_first_frame_ranks_last(capsys, ordering_report):
    rep, _ = ordering_report
    cov = {r.strategy: r.mean_coverage for r in rep.strategies}
    worst = min(cov, key=cov.get)
    ok = worst == "first-frame"
    _report(
        capsys,
        "first-frame-last",
        ok,
        f"lowest mean coverage: {worst}={cov[worst]:.4f}",
    )


# ---------------------------------------------------------------- criterion 8
def test_criterion_08_trajectory_constraints(capsys):
    """100 seeded roam trajectories (1001 frames) pass the per-segment motion
    constraints; rotate-and-return ends exactly where it started."""
    failures = 0
    for s in range(100):
        traj = generate_roam(RoamSpec(1001, (0.0, 0.0, 60.0, 60.0), 12, seed=s))
        if not check_constraints(traj).passed:
            failures += 1
    rr = rotate_and_return(CameraPose(3.0, -2.0, 0.7), 360.0, 154)
    exact = rr.frames[-1].pose == rr.frames[0].pose
    ok = failures == 0 and exact
    _report(
        capsys,
        "trajectory-constraints",
        ok,
        f"{100 - failures}/100 roams pass, rotate-return end==start {exact}",
    )


# ---------------------------------------------------------------- criterion 9
def test_criterion_09_conditioning_contract(capsys):
    """77 frames + 20 context at r=4 -> 40 slots with the predicted block in
    front; predicted positions invariant in the context width."""
    batch = assemble_batch(77, list(range(100, 120)), r=4)
    pred = [s.position_index for s in batch.slots if not s.is_clean]
    ctx = [s.position_index for s in batch.slots if s.is_clean]
    mask = batch.update_mask()
    ok = (
        len(batch.slots) == 40
        and pred == list(range(0, 20))
        and ctx == list(range(20, 40))
        and mask == tuple([True] * 20 + [False] * 20)
    )
    for n_ctx in (0, 1, 5, 20):
        b = assemble_batch(77, list(range(n_ctx)), r=4)
        if [s.position_index for s in b.slots if not s.is_clean] != list(range(20)):
            ok = False
    _report(
        capsys,
        "conditioning-contract",
        ok,
        f"{len(batch.slots)} slots, predicted 0-19, context 20-39, "
        "mask on predicted block, layout stable for context in {0,1,5,20}",
    )


# --------------------------------------------------------------- criterion 10
def test_criterion_10_performance(capsys):
    """10,000 frames in 200x200 m: grid build evaluates <20% of naive pairs,
    1,000 queries run >3x faster than the naive scan with equal results."""
    rep = bench_retrieval(10_000, seed=0, extent=200.0, queries=1_000)
    frac = rep.build_evals / rep.naive_pair_count
    ok = frac < 0.20 and rep.speedup > 3.0 and rep.results_equal
    _report(
        capsys,
        "performance",
        ok,
        f"build evals {rep.build_evals}/{rep.naive_pair_count} ({frac:.1%}), "
        f"query speedup {rep.speedup:.2f}x, results equal {rep.results_equal} "
        f"(build {rep.build_s:.1f}s, grid {rep.grid_query_s:.2f}s, "
        f"naive {rep.naive_query_s:.2f}s; times reported, not asserted)",
    )


# --------------------------------------------------------------- criterion 11
def test_criterion_11_persistence(capsys, tmp_path):
    """Snapshot -> load round-trips are exact for stores (both formats, with
    panoramas) and trajectories."""
    from covis.memory_store import FrameRecord
    from covis.world import render_panorama

    world = generate_world(1.5, 2, (0.0, 0.0, 40.0, 40.0), seed=9)
    traj = generate_roam(RoamSpec(231, (0.0, 0.0, 40.0, 40.0), 8, seed=9))
    ocfg = OverlapConfig()
    store = MemoryStore(ocfg)
    for i, f in enumerate(traj.frames[:120]):
        pano = render_panorama(world, f.pose, ocfg)
        store.append_frame(FrameRecord.from_panorama(i, f.t, f.pose, pano))
    ok = True
    for fmt, name in (("jsonl", "s.jsonl"), ("binary", "s.bin")):
        p = tmp_path / name
        store.snapshot(p, fmt=fmt)
        ok &= load_store(p) == store
    tp = tmp_path / "t.jsonl"
    save_trajectory(traj, tp)
    back = load_trajectory(tp)
    ok &= len(back) == len(traj) and all(
        a.pose == b.pose and a.t == b.t for a, b in zip(back.frames, traj.frames)
    )
    _report(
        capsys,
        "persistence",
        ok,
        "store jsonl+binary and trajectory round-trips exact",
    )
