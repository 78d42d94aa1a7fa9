// Gateway wire protocol (version 1). The console is stateless with respect
// to truth: every displayed quantity originates from a server snapshot.

export const PROTOCOL_VERSION = 1;

export type Phase =
  | "positioning"
  | "scanning"
  | "registering"
  | "reachability_review"
  | "executing"
  | "paused"
  | "sandpaper_change"
  | "repositioning"
  | "complete";

export type Workflow = "structured" | "unstructured";
export type SegmentStatus = "completed" | "reachable" | "unreachable";
export type ReachStatus = "reachable" | "unreachable";

export interface NominalParams {
  passes: number;
  orientation: "horizontal" | "vertical";
  force: number;
  feed: number;
  pitch: number;
}

export interface StateSnapshot {
  type: "state_snapshot";
  seq: number;
  session_id: string;
  protocol_version: number;
  workflow: Workflow;
  phase: Phase;
  clock: number;
  cursor: { segment: number; s: number };
  sandpaper: { usage_seconds: number; efficiency: number };
  coverage: {
    removed_fraction: number;
    oversand_area: number;
    undersand_area: number;
    removed_volume: number;
  };
  segment_statuses: SegmentStatus[];
  registration: { rms_residual: number; inlier_fraction: number; accepted: boolean } | null;
  quad: number[][] | null;
  params: NominalParams;
  reach_preview: { u: number; v: number; status: ReachStatus }[];
  tracked_force: number;
}

export interface SegmentOverlay {
  status: SegmentStatus;
  color: string;
  polyline: [number, number][];
}

export interface ViewFrame {
  type: "view_frame";
  seq: number;
  session_id: string;
  protocol_version: number;
  projection: "ortho" | "camera";
  width: number;
  height: number;
  png_base64: string;
  overlays: {
    segments: SegmentOverlay[];
    reach_points: { xy: [number, number]; status: ReachStatus; color: string }[];
    markers: [number, number][];
  };
}

export interface ErrorMessage {
  type: "error";
  seq: number;
  message: string;
}

export type ServerMessage = StateSnapshot | ViewFrame | ErrorMessage;

export function parseServerMessage(raw: string): ServerMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const t = (data as { type?: unknown }).type;
  if (t === "state_snapshot" || t === "view_frame" || t === "error") {
    return data as ServerMessage;
  }
  return null;
}

// -- client -> server ---------------------------------------------------------

export interface PhaseAction {
  type: "phase_action";
  action: string;
  payload?: Record<string, unknown>;
}

export interface MarkerUpdate {
  type: "marker_update";
  pixels: [number, number][];
}

export interface ParameterUpdate {
  type: "parameter_update";
  params: NominalParams;
}

export interface CorrectionStream {
  type: "correction_stream";
  coupled?: number;
  axes?: [number, number, number, number];
  backtrack: boolean;
}

export interface PoseNudge {
  type: "pose_nudge";
  translation: [number, number, number];
  rotation: [number, number, number];
}

export type ClientMessage =
  | PhaseAction
  | MarkerUpdate
  | ParameterUpdate
  | CorrectionStream
  | PoseNudge
  | { type: "request_snapshot" }
  | { type: "request_view" };

export function clampUnit(x: number): number {
  if (Number.isNaN(x)) return 0;
  return Math.min(1, Math.max(-1, x));
}

export const PARAM_RANGES = {
  passes: [1, 10],
  force: [1, 40],
  feed: [10, 200],
  pitch: [-0.15, 0.15],
} as const;

function clampRange(x: number, lo: number, hi: number): number {
  if (Number.isNaN(x)) return lo;
  return Math.min(hi, Math.max(lo, x));
}

// Client-side convenience clamp; the server clamp stays authoritative.
export function clampParams(p: NominalParams): NominalParams {
  return {
    passes: Math.round(clampRange(p.passes, ...PARAM_RANGES.passes)),
    orientation: p.orientation === "vertical" ? "vertical" : "horizontal",
    force: clampRange(p.force, ...PARAM_RANGES.force),
    feed: clampRange(p.feed, ...PARAM_RANGES.feed),
    pitch: clampRange(p.pitch, ...PARAM_RANGES.pitch),
  };
}

export function correctionMessage(
  mode: "coupled" | "independent",
  value: number | [number, number, number, number],
  backtrack: boolean,
): CorrectionStream {
  if (mode === "coupled") {
    return { type: "correction_stream", coupled: clampUnit(value as number), backtrack };
  }
  const axes = (value as number[]).map(clampUnit) as [number, number, number, number];
  return { type: "correction_stream", axes, backtrack };
}
