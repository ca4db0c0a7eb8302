/** Wire types mirroring the gateway's JSON schemas (schema_version 1). */

export const SCHEMA_VERSION = 1;

export interface PoseDoc {
  x: number;
  y: number;
  yaw: number;
  fov: number;
}

export interface IntersectionDoc {
  point: [number, number];
  distance: number;
}

export type CandidateStage = "most-recent" | "dedup-survivor" | "fov-pass" | "other";

export interface CandidateDoc {
  frame_id: number;
  pose: PoseDoc;
  overlaps: boolean;
  reject_reason: string | null;
  intersections: IntersectionDoc[];
  stage: CandidateStage;
}

export interface PanoramaDoc {
  ids: number[];
  depths: (number | null)[];
}

export interface EffectiveConfigDoc {
  strategy: string;
  k: number;
  far_slots: number;
  d_min: number;
  d_max: number;
  seed: number;
}

export interface StepResult {
  schema_version: number;
  session_id: string;
  step: number;
  frame_id: number;
  clamped: boolean;
  target: PoseDoc;
  most_recent_id: number;
  retrieved: number[];
  fans: {
    target: number[][];
    retrieved: Record<string, number[][]>;
  };
  candidates: CandidateDoc[];
  coverage: number;
  panorama: PanoramaDoc;
  effective_config: EffectiveConfigDoc;
}

export interface SessionState {
  schema_version: number;
  session_id: string;
  step: number;
  store_size: number;
  current_pose: PoseDoc;
  coverage_history: number[];
  world: {
    seed: number;
    bounds: number[];
    landmarks: number;
    occluders: number;
  };
  effective_config: EffectiveConfigDoc;
  poses: PoseDoc[];
}

export interface StepLogEntry {
  request: unknown;
  result: StepResult;
}
