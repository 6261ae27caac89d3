// Pure view model. render() maps session state to a screen description the
// DOM layer (or a test) can inspect; it must never leak anything the
// participant is not supposed to see, which is why the cache/degraded
// internals stop here and only the list order goes out.

import {
  RATING_CONTROLS,
  requiredRatingsComplete,
  type RatingKey,
  type UiSessionState,
} from "./state.js";

export interface PlayerSpec {
  itemId: string;
  /** External embed when the id resolves publicly, otherwise null and the
      UI shows a timed placeholder, which keeps the harness testable offline. */
  embedUrl: string | null;
  placeholderSeconds: number;
}

export interface RatingView {
  key: RatingKey;
  label: string;
  required: boolean;
  value: number | null;
  scale: number;
}

export type Screen =
  | { kind: "region-select"; regions: string[]; banner: string | null }
  | { kind: "instructions"; region: string; choices: string[]; text: string; banner: string | null }
  | {
      kind: "watching";
      step: number;
      watchCount: number;
      player: PlayerSpec;
      tiles: string[];
      ratings: RatingView[];
      canAdvance: boolean;
      final: boolean;
      banner: string | null;
    }
  | { kind: "done"; message: string };

const INSTRUCTIONS_TEXT =
  "You will watch five short videos. Pick any video below to start. " +
  "After each video, rate it and pick the next one from the suggestions.";

/** Ids shaped like public video ids get a real embed; synthetic ids do not. */
export function embedUrlFor(itemId: string, template: string | null): string | null {
  if (!template || !/^[A-Za-z0-9_-]{11}$/.test(itemId)) return null;
  return template.replace("{id}", itemId);
}

export function render(state: UiSessionState, embedTemplate: string | null = null): Screen {
  switch (state.phase) {
    case "region-select":
      return { kind: "region-select", regions: state.regions, banner: state.banner };

    case "instructions":
      return {
        kind: "instructions",
        region: state.region ?? "",
        choices: state.initial,
        text: INSTRUCTIONS_TEXT,
        banner: state.banner,
      };

    case "watching": {
      const current = state.current ?? "";
      return {
        kind: "watching",
        step: state.step,
        watchCount: state.watchCount,
        player: {
          itemId: current,
          embedUrl: embedUrlFor(current, embedTemplate),
          placeholderSeconds: 15,
        },
        tiles: [...state.tiles],
        ratings: RATING_CONTROLS.map((c) => ({
          key: c.key,
          label: c.label,
          required: c.required,
          value: state.pendingRatings[c.key] ?? null,
          scale: 5,
        })),
        canAdvance: requiredRatingsComplete(state.pendingRatings),
        final: state.step >= state.watchCount,
        banner: state.banner,
      };
    }

    case "done":
      return { kind: "done", message: "All done. Thank you for taking part!" };
  }
}
