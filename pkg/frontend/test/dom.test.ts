// @vitest-environment jsdom
import { describe, expect, it } from "vitest";

import { mount } from "../src/dom.js";
import { render } from "../src/render.js";
import { initialState, type UiEvent, type UiSessionState } from "../src/state.js";

function watching(overrides: Partial<UiSessionState> = {}): UiSessionState {
  return {
    ...initialState(["alpha"]),
    phase: "watching",
    region: "alpha",
    token: "tok",
    watchCount: 5,
    step: 1,
    current: "v1",
    tiles: ["a", "b", "c", "d", "e"],
    pendingRatings: { relevance: 4, interest: 5 },
    ...overrides,
  };
}

function testid(id: string): HTMLElement {
  const node = document.querySelector(`[data-testid="${id}"]`);
  if (!node) throw new Error(`missing [data-testid=${id}]`);
  return node as HTMLElement;
}

describe("dom layer", () => {
  it("renders tiles as buttons in order and clicks dispatch positions", () => {
    const events: UiEvent[] = [];
    mount(document.body, render(watching()), (e) => events.push(e));

    const tiles = document.querySelectorAll('[data-testid="tiles"] button');
    expect([...tiles].map((b) => b.textContent)).toEqual(["a", "b", "c", "d", "e"]);

    testid("tile-3").click();
    expect(events).toEqual([{ type: "select", position: 3 }]);
    expect(document.body.innerHTML).not.toContain("cached");
  });

  it("disables tiles until required ratings are set", () => {
    mount(document.body, render(watching({ pendingRatings: {} })), () => {});
    expect(testid("tile-1").hasAttribute("disabled")).toBe(true);

    mount(document.body, render(watching()), () => {});
    expect(testid("tile-1").hasAttribute("disabled")).toBe(false);
  });

  it("stars reflect and dispatch rating values", () => {
    const events: UiEvent[] = [];
    mount(document.body, render(watching({ pendingRatings: { interest: 3 } })),
      (e) => events.push(e));

    expect(testid("rate-interest-3").getAttribute("aria-pressed")).toBe("true");
    expect(testid("rate-interest-4").getAttribute("aria-pressed")).toBe("false");

    testid("rate-relevance-5").click();
    expect(events).toEqual([{ type: "set-rating", key: "relevance", value: 5 }]);
  });

  it("shows a retryable banner and keeps the form", () => {
    mount(document.body,
      render(watching({ banner: "The service rejected that. Please try again." })),
      () => {});
    expect(testid("banner").textContent).toContain("try again");
    expect(document.querySelectorAll('[data-testid="ratings"] button').length).toBe(20);
  });

  it("final step shows finish instead of tiles; done shows thanks", () => {
    mount(document.body, render(watching({ step: 5, tiles: [] })), () => {});
    expect(document.querySelector('[data-testid="tiles"]')).toBeNull();
    expect(testid("finish")).toBeTruthy();

    mount(document.body, render({ ...watching(), phase: "done" }), () => {});
    expect(testid("thanks").textContent).toContain("Thank you");
  });
});
