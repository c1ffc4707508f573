// Console state reducer. The console is stateless with respect to the
// engine: reconnecting replays /state plus buffered events, and every
// transition below is a pure function so it can be tested headlessly.

import type {
  FrameOutcomeData,
  HocPendingData,
  PrefPair,
  ServiceEvent,
  StateSnapshot,
  Thresholds,
} from "./types.js";

export interface TimelineEntry {
  eventId: number;
  frameId: number;
  label: string;
}

export interface ConsoleState {
  connection: "connecting" | "open" | "closed";
  lastEventId: number;
  latestFrame: FrameOutcomeData | null;
  pendingHoc: HocPendingData | null;
  resolveInFlight: boolean;
  resolveError: string | null;
  prefs: PrefPair[];
  thresholds: Thresholds | null;
  timeline: TimelineEntry[];
  episodeDone: boolean;
  serviceError: string | null;
}

export const TIMELINE_LIMIT = 200;

export function initialState(): ConsoleState {
  return {
    connection: "connecting",
    lastEventId: 0,
    latestFrame: null,
    pendingHoc: null,
    resolveInFlight: false,
    resolveError: null,
    prefs: [],
    thresholds: null,
    timeline: [],
    episodeDone: false,
    serviceError: null,
  };
}

export type Action =
  | { type: "connected" }
  | { type: "disconnected" }
  | { type: "snapshot"; snapshot: StateSnapshot }
  | { type: "event"; event: ServiceEvent }
  | { type: "resolve_started" }
  | { type: "resolve_failed"; message: string };

export function reduce(state: ConsoleState, action: Action): ConsoleState {
  switch (action.type) {
    case "connected":
      return { ...state, connection: "open" };
    case "disconnected":
      // The modal persists across a drop; allowing a fresh submit afterwards
      // is exactly why the in-flight flag resets here.
      return { ...state, connection: "closed", resolveInFlight: false };
    case "snapshot":
      return {
        ...state,
        prefs: action.snapshot.prefs,
        thresholds: action.snapshot.thresholds,
        episodeDone: action.snapshot.done,
        serviceError: action.snapshot.error,
      };
    case "resolve_started":
      return { ...state, resolveInFlight: true, resolveError: null };
    case "resolve_failed":
      return { ...state, resolveInFlight: false, resolveError: action.message };
    case "event":
      return applyEvent(state, action.event);
  }
}

function pushTimeline(
  timeline: TimelineEntry[],
  entry: TimelineEntry,
): TimelineEntry[] {
  const next = [...timeline, entry];
  return next.length > TIMELINE_LIMIT ? next.slice(next.length - TIMELINE_LIMIT) : next;
}

function applyEvent(state: ConsoleState, event: ServiceEvent): ConsoleState {
  if (event.id <= state.lastEventId) {
    return state; // replay overlap after reconnect
  }
  const base = { ...state, lastEventId: event.id };
  switch (event.type) {
    case "frame_outcome": {
      const entry: TimelineEntry = {
        eventId: event.id,
        frameId: event.data.frame_id,
        label: event.data.event,
      };
      return {
        ...base,
        latestFrame: event.data,
        prefs: event.data.prefs,
        timeline:
          event.data.event === "NO_CALL"
            ? base.timeline
            : pushTimeline(base.timeline, entry),
      };
    }
    case "hoc_pending":
      return { ...base, pendingHoc: event.data, resolveInFlight: false };
    case "hoc_resolved":
      return {
        ...base,
        pendingHoc:
          base.pendingHoc !== null &&
          base.pendingHoc.request_id === event.data.request_id
            ? null
            : base.pendingHoc,
        resolveInFlight: false,
        resolveError: null,
      };
    case "episode_done":
      return { ...base, episodeDone: true };
    case "error":
      return { ...base, serviceError: event.data.message };
  }
}
