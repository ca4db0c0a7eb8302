/** Pure view-model reducer for the steering UI.
 *
 * Every displayed verdict (retrieved ids, stages, reject reasons,
 * coverage) is taken verbatim from the gateway's StepResult; the client
 * performs no retrieval geometry of its own. A schema-version mismatch or
 * malformed payload raises the error banner and leaves the rest of the
 * state untouched.
 */

import {
  CandidateDoc,
  CandidateStage,
  EffectiveConfigDoc,
  PanoramaDoc,
  PoseDoc,
  SCHEMA_VERSION,
  StepResult,
} from "./types.js";

export const STAGE_COLORS: Record<CandidateStage, string> = {
  "most-recent": "#f3c614",
  "dedup-survivor": "#2db4a0",
  "fov-pass": "#4a90d9",
  other: "#9b7fd4",
};

export const REJECT_COLOR = "#c0574f";

export interface FanView {
  frameId: number;
  polygon: number[][];
  stage: CandidateStage;
  color: string;
  isMostRecent: boolean;
}

export interface RejectView {
  frameId: number;
  pose: PoseDoc;
  reason: string;
  /** first ray-crossing distance if the heuristic recorded one */
  distance: number | null;
}

export interface ViewState {
  errorBanner: string | null;
  step: number;
  camera: PoseDoc | null;
  targetFan: number[][] | null;
  fans: FanView[];
  rejected: RejectView[];
  showRejected: boolean;
  mostRecentId: number | null;
  coverageHistory: number[];
  panorama: PanoramaDoc | null;
  hoveredPanorama: PanoramaDoc | null;
  effectiveConfig: EffectiveConfigDoc | null;
  clamped: boolean;
}

export function initialViewState(): ViewState {
  return {
    errorBanner: null,
    step: 0,
    camera: null,
    targetFan: null,
    fans: [],
    rejected: [],
    showRejected: false,
    mostRecentId: null,
    coverageHistory: [],
    panorama: null,
    hoveredPanorama: null,
    effectiveConfig: null,
    clamped: false,
  };
}

function isFiniteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

function isPolygon(v: unknown): v is number[][] {
  return (
    Array.isArray(v) &&
    v.every((p) => Array.isArray(p) && p.length === 2 && p.every(isFiniteNumber))
  );
}

/** Structural check of the fields the reducer consumes; returns a problem
 * description or null. */
export function validateStepResult(doc: unknown): string | null {
  if (typeof doc !== "object" || doc === null) {
    return "step result is not an object";
  }
  const r = doc as Record<string, unknown>;
  if (r.schema_version !== SCHEMA_VERSION) {
    return `schema_version ${String(r.schema_version)} != supported ${SCHEMA_VERSION}`;
  }
  if (!Array.isArray(r.retrieved) || !r.retrieved.every((i) => Number.isInteger(i))) {
    return "retrieved must be an array of frame ids";
  }
  const fans = r.fans as Record<string, unknown> | undefined;
  if (typeof fans !== "object" || fans === null || !isPolygon(fans.target)) {
    return "fans.target must be a polygon";
  }
  const retrievedFans = fans.retrieved as Record<string, unknown> | undefined;
  if (typeof retrievedFans !== "object" || retrievedFans === null) {
    return "fans.retrieved must be a map";
  }
  for (const id of r.retrieved as number[]) {
    if (!isPolygon(retrievedFans[String(id)])) {
      return `fans.retrieved missing polygon for frame ${id}`;
    }
  }
  if (!Array.isArray(r.candidates)) {
    return "candidates must be an array";
  }
  if (!isFiniteNumber(r.coverage)) {
    return "coverage must be a finite number";
  }
  const target = r.target as Record<string, unknown> | undefined;
  if (
    typeof target !== "object" ||
    target === null ||
    !isFiniteNumber(target.x) ||
    !isFiniteNumber(target.y)
  ) {
    return "target pose is malformed";
  }
  return null;
}

/** Apply one gateway StepResult; returns the next view state. Invalid input
 * only sets the error banner. */
export function applyStepResult(state: ViewState, doc: unknown): ViewState {
  const problem = validateStepResult(doc);
  if (problem !== null) {
    return { ...state, errorBanner: problem };
  }
  const result = doc as StepResult;
  const stageById = new Map<number, CandidateStage>();
  for (const c of result.candidates) {
    stageById.set(c.frame_id, c.stage);
  }
  const fans: FanView[] = result.retrieved.map((id) => {
    const stage = stageById.get(id) ?? "other";
    return {
      frameId: id,
      polygon: result.fans.retrieved[String(id)]!,
      stage,
      color: STAGE_COLORS[stage],
      isMostRecent: id === result.most_recent_id,
    };
  });
  const rejected: RejectView[] = result.candidates
    .filter((c: CandidateDoc) => !c.overlaps)
    .map((c) => ({
      frameId: c.frame_id,
      pose: c.pose,
      reason: c.reject_reason ?? "rejected",
      distance: c.intersections.length > 0 ? c.intersections[0]!.distance : null,
    }));
  return {
    ...state,
    errorBanner: null,
    step: result.step,
    camera: result.target,
    targetFan: result.fans.target,
    fans,
    rejected,
    mostRecentId: result.most_recent_id,
    coverageHistory: [...state.coverageHistory, result.coverage],
    panorama: result.panorama,
    effectiveConfig: result.effective_config,
    clamped: result.clamped,
  };
}

export function toggleRejected(state: ViewState): ViewState {
  return { ...state, showRejected: !state.showRejected };
}

/** Fan frame ids currently rendered, ascending — the replay comparison key. */
export function renderedFanIds(state: ViewState): number[] {
  return state.fans.map((f) => f.frameId).sort((a, b) => a - b);
}

/** Downsample the coverage history into sparkline points in [0, 1]. */
export function sparklinePoints(state: ViewState, maxPoints = 120): number[] {
  const h = state.coverageHistory;
  if (h.length <= maxPoints) {
    return [...h];
  }
  const out: number[] = [];
  for (let i = 0; i < maxPoints; i++) {
    out.push(h[Math.floor((i * h.length) / maxPoints)]!);
  }
  return out;
}
