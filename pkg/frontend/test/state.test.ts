import { describe, expect, it } from "vitest";

import {
  STAGE_COLORS,
  applyStepResult,
  initialViewState,
  renderedFanIds,
  sparklinePoints,
  toggleRejected,
} from "../src/state.js";
import { SCHEMA_VERSION, StepResult } from "../src/types.js";

function fanAt(x: number, y: number): number[][] {
  return [
    [x, y],
    [x + 1, y + 0.5],
    [x + 1, y - 0.5],
  ];
}

function makeResult(retrieved: number[], overrides: Partial<StepResult> = {}): StepResult {
  const fans: Record<string, number[][]> = {};
  for (const id of retrieved) {
    fans[String(id)] = fanAt(id, 0);
  }
  return {
    schema_version: SCHEMA_VERSION,
    session_id: "sess-0-1",
    step: 1,
    frame_id: retrieved.length + 1,
    clamped: false,
    target: { x: 0, y: 0, yaw: 0, fov: 0.9 },
    most_recent_id: retrieved.length > 0 ? retrieved[retrieved.length - 1]! : 0,
    retrieved,
    fans: { target: fanAt(0, 0), retrieved: fans },
    candidates: retrieved.map((id) => ({
      frame_id: id,
      pose: { x: id, y: 0, yaw: 0, fov: 0.9 },
      overlaps: true,
      reject_reason: null,
      intersections: [],
      stage: id % 2 === 0 ? ("fov-pass" as const) : ("dedup-survivor" as const),
    })),
    coverage: 0.5,
    panorama: { ids: [1, -1, 2], depths: [3.5, null, 7.25] },
    effective_config: {
      strategy: "fov-nonadj-fst",
      k: 20,
      far_slots: 2,
      d_min: 0.25,
      d_max: 20,
      seed: 0,
    },
    ...overrides,
  };
}

describe("applyStepResult", () => {
  it("draws only the target fan when nothing was retrieved", () => {
    const next = applyStepResult(initialViewState(), makeResult([]));
    expect(next.errorBanner).toBeNull();
    expect(next.targetFan).not.toBeNull();
    expect(next.fans).toHaveLength(0);
  });

  it("renders one fan per retrieved id plus the recent-frame badge", () => {
    const ids = Array.from({ length: 20 }, (_, i) => i + 3);
    const next = applyStepResult(initialViewState(), makeResult(ids));
    expect(next.fans).toHaveLength(20);
    expect(renderedFanIds(next)).toEqual(ids);
    const recent = next.fans.filter((f) => f.isMostRecent);
    expect(recent).toHaveLength(1);
    expect(recent[0]!.frameId).toBe(22);
  });

  it("colors fans by the stage reported by the server", () => {
    const next = applyStepResult(initialViewState(), makeResult([4, 5]));
    const byId = new Map(next.fans.map((f) => [f.frameId, f]));
    expect(byId.get(4)!.color).toBe(STAGE_COLORS["fov-pass"]);
    expect(byId.get(5)!.color).toBe(STAGE_COLORS["dedup-survivor"]);
  });

  it("keeps rejected candidates renderable on demand with the reason", () => {
    const result = makeResult([2]);
    result.candidates.push({
      frame_id: 9,
      pose: { x: 50, y: 0, yaw: 0, fov: 0.9 },
      overlaps: false,
      reject_reason: "TooFar",
      intersections: [{ point: [25, 0], distance: 25.0 }],
      stage: "fov-pass",
    });
    let state = applyStepResult(initialViewState(), result);
    expect(state.rejected).toEqual([
      { frameId: 9, pose: { x: 50, y: 0, yaw: 0, fov: 0.9 }, reason: "TooFar", distance: 25.0 },
    ]);
    expect(state.showRejected).toBe(false);
    state = toggleRejected(state);
    expect(state.showRejected).toBe(true);
  });

  it("appends coverage to the sparkline history", () => {
    let state = initialViewState();
    state = applyStepResult(state, makeResult([], { coverage: 0.25 }));
    state = applyStepResult(state, makeResult([], { coverage: 0.75, step: 2 }));
    expect(state.coverageHistory).toEqual([0.25, 0.75]);
    expect(sparklinePoints(state)).toEqual([0.25, 0.75]);
  });

  it("raises the error banner and changes nothing else on a schema mismatch", () => {
    const populated = applyStepResult(initialViewState(), makeResult([1, 2, 5]));
    const bad = makeResult([7]) as unknown as Record<string, unknown>;
    bad.schema_version = SCHEMA_VERSION + 1;
    const next = applyStepResult(populated, bad);
    expect(next.errorBanner).toContain("schema_version");
    expect({ ...next, errorBanner: null }).toEqual({ ...populated, errorBanner: null });
  });

  it("rejects structurally broken payloads without throwing", () => {
    const populated = applyStepResult(initialViewState(), makeResult([1]));
    for (const bad of [null, 42, "x", {}, { schema_version: SCHEMA_VERSION }]) {
      const next = applyStepResult(populated, bad);
      expect(next.errorBanner).not.toBeNull();
      expect(next.fans).toEqual(populated.fans);
    }
  });

  it("flags a retrieved id with no fan polygon as a schema problem", () => {
    const result = makeResult([3, 4]) as unknown as {
      fans: { retrieved: Record<string, unknown> };
    };
    delete result.fans.retrieved["4"];
    const next = applyStepResult(initialViewState(), result);
    expect(next.errorBanner).toContain("frame 4");
  });
});
