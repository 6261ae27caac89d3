// Imperative DOM layer: rebuilds the screen on every state change and wires
// clicks back into the dispatcher. Framework-free; the interesting logic
// lives in state.ts/render.ts and this file stays dumb on purpose.

import type { Screen } from "./render.js";
import type { UiEvent } from "./state.js";

export type Dispatch = (event: UiEvent) => void;

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

export function mount(root: HTMLElement, screen: Screen, dispatch: Dispatch): void {
  const doc = root.ownerDocument;
  root.textContent = "";

  if ("banner" in screen && screen.banner) {
    root.appendChild(el(doc, "div", { "data-testid": "banner", role: "alert" }, screen.banner));
  }

  switch (screen.kind) {
    case "region-select": {
      root.appendChild(el(doc, "h1", {}, "Where are you watching from?"));
      for (const region of screen.regions) {
        const b = el(doc, "button", { "data-testid": `region-${region}` }, region);
        b.addEventListener("click", () => dispatch({ type: "choose-region", region }));
        root.appendChild(b);
      }
      return;
    }

    case "instructions": {
      root.appendChild(el(doc, "h1", {}, "Before you start"));
      root.appendChild(el(doc, "p", { "data-testid": "instructions" }, screen.text));
      const grid = el(doc, "div", { "data-testid": "choices" });
      screen.choices.forEach((id, i) => {
        const b = el(doc, "button", { "data-testid": `choice-${i}` }, id);
        b.addEventListener("click", () => dispatch({ type: "pick-initial", itemId: id }));
        grid.appendChild(b);
      });
      root.appendChild(grid);
      return;
    }

    case "watching": {
      root.appendChild(el(doc, "h1", {},
        `Video ${screen.step} of ${screen.watchCount}`));

      const player = el(doc, "div", { "data-testid": "player" });
      if (screen.player.embedUrl) {
        player.appendChild(el(doc, "iframe", {
          src: screen.player.embedUrl, title: "player", allowfullscreen: "",
        }));
      } else {
        player.appendChild(el(doc, "div", { class: "placeholder" },
          `Now playing: ${screen.player.itemId}`));
      }
      root.appendChild(player);

      const ratings = el(doc, "fieldset", { "data-testid": "ratings" });
      for (const r of screen.ratings) {
        const row = el(doc, "div", { class: "rating-row" });
        row.appendChild(el(doc, "label", {},
          r.required ? r.label : `${r.label} (optional)`));
        for (let v = 1; v <= r.scale; v++) {
          const star = el(doc, "button", {
            "data-testid": `rate-${r.key}-${v}`,
            "aria-pressed": String(r.value !== null && v <= r.value),
          }, "★");
          star.addEventListener("click", () =>
            dispatch({ type: "set-rating", key: r.key, value: v }));
          row.appendChild(star);
        }
        ratings.appendChild(row);
      }
      root.appendChild(ratings);

      if (screen.final) {
        const fin = el(doc, "button", { "data-testid": "finish" }, "Finish session");
        if (!screen.canAdvance) fin.setAttribute("disabled", "");
        fin.addEventListener("click", () => dispatch({ type: "finish" }));
        root.appendChild(fin);
      } else {
        root.appendChild(el(doc, "h2", {}, "Up next, pick one:"));
        const list = el(doc, "div", { "data-testid": "tiles" });
        screen.tiles.forEach((id, i) => {
          const tile = el(doc, "button", { "data-testid": `tile-${i + 1}` }, id);
          if (!screen.canAdvance) tile.setAttribute("disabled", "");
          tile.addEventListener("click", () =>
            dispatch({ type: "select", position: i + 1 }));
          list.appendChild(tile);
        });
        root.appendChild(list);
      }
      return;
    }

    case "done": {
      root.appendChild(el(doc, "h1", { "data-testid": "thanks" }, screen.message));
      return;
    }
  }
}
