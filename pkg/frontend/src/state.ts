// Session state machine. `advance` is the only way the UI mutates anything:
// it validates the event against the current phase, talks to the service,
// and returns the next state. Illegal events return the state object
// unchanged (same reference) so callers can cheaply detect a no-op.

import { ApiError, type ExperimentApi, type Ratings } from "./api.js";

export type Phase = "region-select" | "instructions" | "watching" | "done";

export type RatingKey = "relevance" | "interest" | "stream_quality" | "overall";

export interface RatingControl {
  key: RatingKey;
  label: string;
  required: boolean;
}

// Neutral wording on purpose: the participant must not be able to infer
// what the experiment is measuring from the question text.
export const RATING_CONTROLS: readonly RatingControl[] = [
  { key: "relevance", label: "How well did this video follow from the previous one?", required: true },
  { key: "interest", label: "How interesting was this video to you?", required: true },
  { key: "stream_quality", label: "How was the playback quality?", required: false },
  { key: "overall", label: "How satisfied are you with this session so far?", required: false },
];

export interface UiSessionState {
  phase: Phase;
  regions: string[];
  region: string | null;
  token: string | null;
  initial: string[];
  watchCount: number;
  step: number;
  current: string | null;
  tiles: string[];
  degraded: boolean;
  pendingRatings: Partial<Record<RatingKey, number>>;
  banner: string | null;
}

export function initialState(regions: string[]): UiSessionState {
  return {
    phase: "region-select",
    regions,
    region: null,
    token: null,
    initial: [],
    watchCount: 0,
    step: 0,
    current: null,
    tiles: [],
    degraded: false,
    pendingRatings: {},
    banner: null,
  };
}

export type UiEvent =
  | { type: "choose-region"; region: string }
  | { type: "pick-initial"; itemId: string }
  | { type: "set-rating"; key: RatingKey; value: number }
  | { type: "select"; position: number }
  | { type: "finish" };

export function requiredRatingsComplete(pending: Partial<Record<RatingKey, number>>): boolean {
  return RATING_CONTROLS.every((c) => !c.required || pending[c.key] !== undefined);
}

function isRatingKey(key: string): key is RatingKey {
  return RATING_CONTROLS.some((c) => c.key === key);
}

function banner(state: UiSessionState, err: unknown): UiSessionState {
  const message = err instanceof ApiError
    ? `The service rejected that (${err.detail}). Please try again.`
    : "Could not reach the service. Please try again.";
  return { ...state, banner: message };
}

export async function advance(
  api: ExperimentApi,
  state: UiSessionState,
  event: UiEvent,
): Promise<UiSessionState> {
  switch (state.phase) {
    case "region-select": {
      if (event.type !== "choose-region" || !state.regions.includes(event.region)) {
        return state;
      }
      try {
        const s = await api.createSession(event.region);
        return {
          ...state,
          phase: "instructions",
          region: s.region,
          token: s.token,
          initial: s.initial,
          watchCount: s.watch_count,
          step: s.step,
          banner: null,
        };
      } catch (err) {
        return banner(state, err);
      }
    }

    case "instructions": {
      if (event.type !== "pick-initial" || !state.initial.includes(event.itemId)) {
        return state;
      }
      try {
        const rec = await api.recommendations(state.token!, event.itemId);
        return {
          ...state,
          phase: "watching",
          step: 1,
          current: event.itemId,
          tiles: rec.items,
          degraded: rec.degraded,
          pendingRatings: {},
          banner: null,
        };
      } catch (err) {
        return banner(state, err);
      }
    }

    case "watching": {
      if (event.type === "set-rating") {
        if (!isRatingKey(event.key) || !Number.isInteger(event.value)
            || event.value < 1 || event.value > 5) {
          return state;
        }
        return {
          ...state,
          pendingRatings: { ...state.pendingRatings, [event.key]: event.value },
        };
      }

      const final = state.step >= state.watchCount;
      if (!final && event.type === "select") {
        if (event.position < 1 || event.position > state.tiles.length) return state;
        if (!requiredRatingsComplete(state.pendingRatings)) return state;
        try {
          const ack = await api.recordStep(
            state.token!, event.position, state.pendingRatings as Ratings);
          const next = ack.selected!;
          if (ack.step >= state.watchCount) {
            // final video: nothing further is recommended, only rated
            return {
              ...state,
              step: ack.step,
              current: next,
              tiles: [],
              degraded: false,
              pendingRatings: {},
              banner: null,
            };
          }
          const rec = await api.recommendations(state.token!, next);
          return {
            ...state,
            step: ack.step,
            current: next,
            tiles: rec.items,
            degraded: rec.degraded,
            pendingRatings: {},
            banner: null,
          };
        } catch (err) {
          return banner(state, err); // entered ratings survive in pendingRatings
        }
      }

      if (final && event.type === "finish") {
        if (!requiredRatingsComplete(state.pendingRatings)) return state;
        try {
          await api.recordStep(state.token!, null, state.pendingRatings as Ratings);
          return { ...state, phase: "done", tiles: [], pendingRatings: {}, banner: null };
        } catch (err) {
          return banner(state, err);
        }
      }

      return state;
    }

    case "done":
      return state;
  }
}

// --- Reload safety -----------------------------------------------------------
// Enough to re-enter the session after a refresh; the server re-serves the
// stored recommendation list for the current step, so nothing forks.

export interface SessionSnapshot {
  token: string;
  region: string;
  step: number;
  current: string;
  watchCount: number;
}

export function toSnapshot(state: UiSessionState): SessionSnapshot | null {
  if (state.phase !== "watching" || !state.token || !state.current || !state.region) {
    return null;
  }
  return {
    token: state.token,
    region: state.region,
    step: state.step,
    current: state.current,
    watchCount: state.watchCount,
  };
}

export async function fromSnapshot(
  api: ExperimentApi,
  regions: string[],
  snap: SessionSnapshot,
): Promise<UiSessionState> {
  const base: UiSessionState = {
    ...initialState(regions),
    phase: "watching",
    region: snap.region,
    token: snap.token,
    watchCount: snap.watchCount,
    step: snap.step,
    current: snap.current,
  };
  if (snap.step >= snap.watchCount) return base; // final, rate-only screen
  const rec = await api.recommendations(snap.token, snap.current);
  return { ...base, tiles: rec.items, degraded: rec.degraded };
}
