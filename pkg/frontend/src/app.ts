// Glue object: owns the current state, funnels DOM events through advance(),
// re-renders after every transition, and keeps a resume snapshot in storage
// so a page reload drops the participant back into the same step.

import type { ExperimentApi } from "./api.js";
import { mount } from "./dom.js";
import { render } from "./render.js";
import {
  advance,
  fromSnapshot,
  initialState,
  toSnapshot,
  type SessionSnapshot,
  type UiEvent,
  type UiSessionState,
} from "./state.js";

const SNAPSHOT_KEY = "expui.session";

export interface AppOptions {
  embedTemplate?: string | null;
  storage?: Pick<Storage, "getItem" | "setItem" | "removeItem"> | null;
}

export class ExpUiApp {
  state: UiSessionState;
  private busy = false;

  constructor(
    private readonly api: ExperimentApi,
    private readonly root: HTMLElement,
    private readonly options: AppOptions = {},
  ) {
    this.state = initialState([]);
  }

  async start(): Promise<void> {
    const regions = await this.api.regions();
    const snap = this.loadSnapshot();
    if (snap) {
      try {
        this.state = await fromSnapshot(this.api, regions, snap);
      } catch {
        this.clearSnapshot(); // stale session: start over
        this.state = initialState(regions);
      }
    } else {
      this.state = initialState(regions);
    }
    this.renderNow();
  }

  async dispatch(event: UiEvent): Promise<void> {
    if (this.busy) return; // one in-flight transition at a time
    this.busy = true;
    try {
      const next = await advance(this.api, this.state, event);
      if (next !== this.state) {
        this.state = next;
        this.saveSnapshot();
        this.renderNow();
      }
    } finally {
      this.busy = false;
    }
  }

  renderNow(): void {
    mount(this.root, render(this.state, this.options.embedTemplate ?? null),
      (ev) => void this.dispatch(ev));
  }

  private loadSnapshot(): SessionSnapshot | null {
    const raw = this.options.storage?.getItem(SNAPSHOT_KEY);
    if (!raw) return null;
    try {
      return JSON.parse(raw) as SessionSnapshot;
    } catch {
      return null;
    }
  }

  private saveSnapshot(): void {
    const storage = this.options.storage;
    if (!storage) return;
    const snap = toSnapshot(this.state);
    if (snap) storage.setItem(SNAPSHOT_KEY, JSON.stringify(snap));
    else if (this.state.phase === "done") storage.removeItem(SNAPSHOT_KEY);
  }

  private clearSnapshot(): void {
    this.options.storage?.removeItem(SNAPSHOT_KEY);
  }
}
