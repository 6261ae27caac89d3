import { describe, expect, it } from "vitest";

import { ApiError, type ExperimentApi, type Ratings, type StepAck } from "../src/api.js";
import {
  advance,
  fromSnapshot,
  initialState,
  toSnapshot,
  type UiSessionState,
} from "../src/state.js";

const REQUIRED: Ratings = { relevance: 4, interest: 5 };

/** In-memory stand-in for the service, recording every record_step call. */
class FakeApi implements ExperimentApi {
  recorded: Array<{ position: number | null; ratings: Ratings }> = [];
  failNext: ApiError | null = null;
  watchCount = 5;
  private step = 1;

  async regions() {
    return ["alpha", "beta"];
  }

  async createSession(region: string) {
    return {
      token: "tok-1",
      region,
      initial: ["i01", "i02", "i03"],
      step: 1,
      watch_count: this.watchCount,
    };
  }

  async recommendations(_token: string, current: string) {
    if (this.failNext) {
      const err = this.failNext;
      this.failNext = null;
      throw err;
    }
    return {
      items: [1, 2, 3, 4, 5].map((i) => `${current}-r${i}`),
      step: this.step,
      degraded: false,
    };
  }

  async recordStep(_token: string, position: number | null, ratings: Ratings): Promise<StepAck> {
    if (this.failNext) {
      const err = this.failNext;
      this.failNext = null;
      throw err;
    }
    this.recorded.push({ position, ratings: { ...ratings } });
    if (position === null) return { step: this.step, done: true, selected: null };
    this.step += 1;
    return { step: this.step, done: false, selected: `v${this.step}` };
  }
}

async function rate(api: FakeApi, state: UiSessionState): Promise<UiSessionState> {
  state = await advance(api, state, { type: "set-rating", key: "relevance", value: 4 });
  return advance(api, state, { type: "set-rating", key: "interest", value: 5 });
}

describe("session state machine", () => {
  it("walks the whole flow and posts one step per click", async () => {
    const api = new FakeApi();
    let s = initialState(await api.regions());

    s = await advance(api, s, { type: "choose-region", region: "alpha" });
    expect(s.phase).toBe("instructions");
    expect(s.initial).toHaveLength(3);

    s = await advance(api, s, { type: "pick-initial", itemId: "i02" });
    expect(s.phase).toBe("watching");
    expect(s.step).toBe(1);
    expect(s.tiles).toHaveLength(5);

    const clicks = [2, 3, 1, 5];
    for (const pos of clicks) {
      s = await rate(api, s);
      s = await advance(api, s, { type: "select", position: pos });
    }
    expect(s.step).toBe(5);
    expect(s.tiles).toHaveLength(0); // final video: rate-only

    s = await rate(api, s);
    s = await advance(api, s, { type: "finish" });
    expect(s.phase).toBe("done");

    expect(api.recorded.map((r) => r.position)).toEqual([...clicks, null]);
    expect(api.recorded.every((r) => r.ratings.relevance === 4)).toBe(true);
  });

  it("cannot advance with incomplete required ratings", async () => {
    const api = new FakeApi();
    let s = initialState(await api.regions());
    s = await advance(api, s, { type: "choose-region", region: "alpha" });
    s = await advance(api, s, { type: "pick-initial", itemId: "i01" });

    const only = await advance(api, s, { type: "set-rating", key: "relevance", value: 3 });
    const blocked = await advance(api, only, { type: "select", position: 1 });
    expect(blocked).toBe(only); // same reference: no-op
    expect(api.recorded).toHaveLength(0);
  });

  it("rejects events in the done phase without changing state", async () => {
    const api = new FakeApi();
    let s = initialState(await api.regions());
    s = { ...s, phase: "done" };
    const after = await advance(api, s, { type: "select", position: 1 });
    expect(after).toBe(s);
  });

  it("keeps entered ratings when the service rejects a submission", async () => {
    const api = new FakeApi();
    let s = initialState(await api.regions());
    s = await advance(api, s, { type: "choose-region", region: "alpha" });
    s = await advance(api, s, { type: "pick-initial", itemId: "i01" });
    s = await rate(api, s);

    api.failNext = new ApiError(409, "no recommendations served for this step yet");
    const after = await advance(api, s, { type: "select", position: 2 });
    expect(after.phase).toBe("watching");
    expect(after.step).toBe(1);
    expect(after.banner).toContain("try again");
    expect(after.pendingRatings).toEqual(REQUIRED);

    // the retry goes through and clears the banner
    const done = await advance(api, after, { type: "select", position: 2 });
    expect(done.step).toBe(2);
    expect(done.banner).toBeNull();
  });

  it("ignores garbage events", async () => {
    const api = new FakeApi();
    let s = initialState(await api.regions());
    expect(await advance(api, s, { type: "choose-region", region: "mars" })).toBe(s);

    s = await advance(api, s, { type: "choose-region", region: "beta" });
    expect(await advance(api, s, { type: "pick-initial", itemId: "nope" })).toBe(s);

    s = await advance(api, s, { type: "pick-initial", itemId: "i03" });
    expect(await advance(api, s, { type: "set-rating", key: "relevance", value: 9 })).toBe(s);
    expect(await advance(api, s, { type: "select", position: 0 })).toBe(s);
    expect(await advance(api, s, { type: "select", position: 6 })).toBe(s);
    expect(await advance(api, s, { type: "finish" })).toBe(s); // not the final step
  });

  it("snapshots and resumes mid-session", async () => {
    const api = new FakeApi();
    let s = initialState(await api.regions());
    s = await advance(api, s, { type: "choose-region", region: "alpha" });
    s = await advance(api, s, { type: "pick-initial", itemId: "i01" });
    s = await rate(api, s);
    s = await advance(api, s, { type: "select", position: 3 });

    const snap = toSnapshot(s)!;
    expect(snap.step).toBe(2);

    const resumed = await fromSnapshot(api, await api.regions(), snap);
    expect(resumed.phase).toBe("watching");
    expect(resumed.step).toBe(2);
    expect(resumed.current).toBe(s.current);
    expect(resumed.tiles).toEqual(s.tiles);
    expect(toSnapshot(initialState(["x"]))).toBeNull();
  });
});
