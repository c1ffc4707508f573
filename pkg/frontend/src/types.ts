// Wire types mirroring the service's REST/WebSocket schema.

export type PrefPair = [string, number];

export interface Preview {
  width: number;
  height: number;
  image_png_b64: string;
  pooled_f32_b64: string;
  unc_f32_b64: string;
}

export interface FrameOutcomeData {
  frame_id: number;
  scene_similarity: number;
  u_roi: number;
  event: string;
  calls: string[];
  matched_frame_id: number | null;
  timed_out: boolean;
  prefs: PrefPair[];
  preview: Preview;
}

export type HocReason = "SCENE_CHANGE" | "UNKNOWN_OBJECT";

export interface HocPendingData {
  request_id: number;
  frame_id: number;
  reason: HocReason;
  u_roi: number;
  scene_similarity: number;
  prefs: PrefPair[];
  preview: Preview;
}

export interface HocResolvedData {
  request_id: number;
  frame_id: number;
  responder: string;
  prefs_update: PrefPair[];
}

export type ServiceEvent =
  | { id: number; type: "frame_outcome"; data: FrameOutcomeData }
  | { id: number; type: "hoc_pending"; data: HocPendingData }
  | { id: number; type: "hoc_resolved"; data: HocResolvedData }
  | { id: number; type: "episode_done"; data: { frames: number } }
  | { id: number; type: "error"; data: { message: string } };

export interface Thresholds {
  theta_scene: number;
  theta_roi: number;
  theta_trav: number;
}

export interface StateSnapshot {
  episode: { directory: string; frames: number; width: number; height: number };
  frame_count: number;
  done: boolean;
  error: string | null;
  thresholds: Thresholds;
  prefs: PrefPair[];
  roi: { name: string; polygon: [number, number][] };
  counters: { scene_calls: number; roi_calls: number; history_updates: number };
  pending_hoc: {
    request_id: number;
    frame_id: number;
    reason: HocReason;
    u_roi: number;
    scene_similarity: number;
    prefs: PrefPair[];
  } | null;
  last_event_id: number;
}
