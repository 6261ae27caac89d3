// @vitest-environment jsdom
//
// End-to-end: a scripted participant walks a full five-video session in the
// real UI (DOM clicks only) against the real service process, then the
// admin export is cross-checked in both languages.

import { execFile, spawn, type ChildProcess } from "node:child_process";
import { once } from "node:events";
import { mkdtempSync, writeFileSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { promisify } from "node:util";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { HttpExperimentApi } from "../src/api.js";
import { ExpUiApp } from "../src/app.js";

const execFileAsync = promisify(execFile);
const ADMIN_KEY = "e2e-admin";

let proc: ChildProcess | null = null;
let base = "";

interface ExportedStep {
  presented: string[];
  cached_flags: boolean[];
  position: number;
  selected: string;
  cached: boolean;
  ratings: Record<string, number> | null;
  degraded: boolean;
}

interface ExportedTrace {
  session: string;
  initial: string;
  truncated: boolean;
  steps: ExportedStep[];
  final_ratings: Record<string, number> | null;
  region: string;
}

async function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, "127.0.0.1", () => {
      const addr = srv.address();
      if (addr && typeof addr === "object") {
        const port = addr.port;
        srv.close(() => resolve(port));
      } else {
        srv.close(() => reject(new Error("no port")));
      }
    });
  });
}

async function until(cond: () => boolean, what: string, ms = 15_000): Promise<void> {
  const deadline = Date.now() + ms;
  while (!cond()) {
    if (Date.now() > deadline) throw new Error(`timed out waiting for ${what}`);
    await new Promise((r) => setTimeout(r, 25));
  }
}

function click(id: string): void {
  const node = document.querySelector(`[data-testid="${id}"]`) as HTMLElement | null;
  if (!node) throw new Error(`nothing to click at [data-testid=${id}]`);
  node.click();
}

beforeAll(async () => {
  const port = await freePort();
  base = `http://127.0.0.1:${port}`;
  proc = spawn("python3", [
    "-m", "edgerec.service",
    "--port", String(port),
    "--seed", "7",
    "--admin-key", ADMIN_KEY,
    "--catalog-size", "300",
  ], { stdio: ["ignore", "pipe", "pipe"] });
  proc.stderr?.on("data", () => {});

  const deadline = Date.now() + 60_000;
  for (;;) {
    try {
      const res = await fetch(`${base}/regions`);
      if (res.ok) break;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) throw new Error("service did not come up");
    await new Promise((r) => setTimeout(r, 200));
  }
}, 90_000);

afterAll(async () => {
  if (proc) {
    proc.kill("SIGTERM");
    await Promise.race([once(proc, "exit"), new Promise((r) => setTimeout(r, 5000))]);
  }
});

describe("full session against the live service", () => {
  it("A13: scripted click-through exports a verifiable 4-step trace", async () => {
    const app = new ExpUiApp(new HttpExperimentApi(base), document.body);
    await app.start();
    expect(app.state.phase).toBe("region-select");

    const region = app.state.regions[0]!;
    click(`region-${region}`);
    await until(() => app.state.phase === "instructions", "instructions");
    expect(app.state.initial).toHaveLength(20);

    click("choice-0"); // first trending pick
    await until(() => app.state.phase === "watching", "first watch screen");

    const clicks = [2, 3, 4, 5];
    const seen: string[][] = [];
    for (const pos of clicks) {
      const stepBefore = app.state.step;
      expect(app.state.tiles).toHaveLength(5);
      seen.push([...app.state.tiles]);

      click("rate-relevance-4");
      await until(() => app.state.pendingRatings.relevance === 4, "relevance set");
      click("rate-interest-5");
      await until(() => app.state.pendingRatings.interest === 5, "interest set");
      click("rate-overall-3");
      await until(() => app.state.pendingRatings.overall === 3, "overall set");

      click(`tile-${pos}`);
      await until(() => app.state.step === stepBefore + 1, `step ${stepBefore + 1}`);
    }

    expect(app.state.step).toBe(5);
    expect(app.state.tiles).toHaveLength(0);
    click("rate-relevance-3");
    await until(() => app.state.pendingRatings.relevance === 3, "final relevance");
    click("rate-interest-2");
    await until(() => app.state.pendingRatings.interest === 2, "final interest");
    click("finish");
    await until(() => app.state.phase === "done", "done screen");
    expect(document.querySelector('[data-testid="thanks"]')).toBeTruthy();

    // --- exported trace ---------------------------------------------------
    const res = await fetch(`${base}/export`, { headers: { "X-Admin-Key": ADMIN_KEY } });
    expect(res.status).toBe(200);
    const text = await res.text();
    const lines = text.split("\n").filter((l) => l.trim() !== "");
    expect(lines).toHaveLength(1);
    const trace = JSON.parse(lines[0]!) as ExportedTrace;

    expect(trace.truncated).toBe(false);
    expect(trace.steps).toHaveLength(4);
    expect(trace.steps.map((s) => s.position)).toEqual(clicks);
    for (const [i, step] of trace.steps.entries()) {
      expect(step.presented).toEqual(seen[i]);
      expect(step.selected).toBe(seen[i]![clicks[i]! - 1]);
      expect(step.cached).toBe(step.cached_flags[step.position - 1]);
      expect(step.ratings).toEqual({ relevance: 4, interest: 5, overall: 3 });
    }
    expect(trace.final_ratings).toEqual({ relevance: 3, interest: 2 });

    // hit ratio by hand count, then the same number from the metrics module
    const hits = trace.steps.filter((s) => s.cached).length;
    const byHand = hits / trace.steps.length;

    const dir = mkdtempSync(join(tmpdir(), "expui-e2e-"));
    const tracePath = join(dir, "trace.jsonl");
    writeFileSync(tracePath, lines[0]! + "\n");
    const { stdout } = await execFileAsync("python3", [
      "-c",
      "import sys\n" +
      "from edgerec.demand import load_traces\n" +
      "from edgerec.metrics import chr_sequential\n" +
      "print(chr_sequential(load_traces(sys.argv[1]), k=5).aggregate)",
      tracePath,
    ]);
    const fromMetrics = Number(stdout.trim());
    expect(fromMetrics).toBeCloseTo(byHand, 12);

    console.log(
      `A13 scripted session exports a verifiable trace: PASS ` +
      `(positions ${trace.steps.map((s) => s.position).join(",")}; ` +
      `hit ratio ${byHand.toFixed(2)} by hand = ${fromMetrics.toFixed(2)} by metrics)`,
    );
  }, 110_000);
});
