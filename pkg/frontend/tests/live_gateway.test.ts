// Scripted end-to-end test against the real Python gateway: marker drag
// round trip, correction streaming rate, and segment-status DOM rendering
// from live snapshots.

import { ChildProcess, spawn } from "node:child_process";
import { fileURLToPath } from "node:url";
import path from "node:path";
import { Window } from "happy-dom";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";

import { CorrectionSampler } from "../src/corrections.js";
import { GatewayClient } from "../src/net.js";
import { SessionStore } from "../src/store.js";
import { renderSegmentList } from "../src/view.js";
import type { StateSnapshot } from "../src/protocol.js";

const REPO = path.resolve(path.dirname(fileURLToPath(import.meta.url)), "../..");
const PORT = 8700 + Math.floor(Math.random() * 200);
const WS_URL = `ws://127.0.0.1:${PORT}/ws`;
const HTTP = `http://127.0.0.1:${PORT}`;
const MARKER_PIXELS: [number, number][] = [[200.8, 323.5], [336.1, 324.8], [337.0, 214.8], [201.7, 213.5]];

let server: ChildProcess;
let store: SessionStore;
let client: GatewayClient;

function waitForSnapshot(pred: (s: StateSnapshot) => boolean, timeoutMs = 15000): Promise<StateSnapshot> {
  return new Promise((resolve, reject) => {
    const timer = setTimeout(() => {
      off();
      reject(new Error("timed out waiting for snapshot"));
    }, timeoutMs);
    const off = store.subscribe((s) => {
      if (s.snapshot && pred(s.snapshot)) {
        clearTimeout(timer);
        off();
        resolve(s.snapshot);
      }
    });
    if (store.snapshot && pred(store.snapshot)) {
      clearTimeout(timer);
      off();
      resolve(store.snapshot);
    }
  });
}

beforeAll(async () => {
  server = spawn("python3", [
    "-m", "sandbench.cli", "serve",
    "--scenario", path.join(REPO, "scenarios/unstructured_demo.json"),
    "--port", String(PORT), "--speed", "1.0",
  ], { cwd: REPO, stdio: "ignore" });

  const deadline = Date.now() + 30000;
  for (;;) {
    try {
      const res = await fetch(`${HTTP}/metrics`);
      if (res.ok) break;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) throw new Error("gateway did not start");
    await new Promise((r) => setTimeout(r, 250));
  }

  store = new SessionStore();
  client = new GatewayClient(WS_URL, store, (url) => new WebSocket(url) as never);
  client.connect();
  await waitForSnapshot(() => true);
}, 60000);

afterAll(() => {
  client?.close();
  server?.kill();
});

describe("live gateway", () => {
  it("walks to marker placement", async () => {
    client.send({ type: "phase_action", action: "begin_scan" });
    await waitForSnapshot((s) => s.phase === "scanning");
    client.send({ type: "phase_action", action: "scan_complete" });
    await waitForSnapshot((s) => s.phase === "reachability_review");
  });

  it("marker drag round trip updates quad and reachability grid within 500 ms", async () => {
    const t0 = Date.now();
    client.send({ type: "marker_update", pixels: MARKER_PIXELS });
    const snap = await waitForSnapshot((s) => s.quad !== null && s.reach_preview.length > 0);
    const elapsed = Date.now() - t0;
    console.log(`marker round trip: ${elapsed} ms`);
    expect(elapsed).toBeLessThan(500);
    expect(snap.quad!.length).toBe(4);
    expect(snap.reach_preview.every((p) => ["reachable", "unreachable"].includes(p.status))).toBe(true);
  });

  it("streams corrections at >= 20 Hz into the server event log", async () => {
    client.send({
      type: "parameter_update",
      params: { passes: 1, orientation: "horizontal", force: 15, feed: 50, pitch: 0 },
    });
    client.send({ type: "phase_action", action: "start_execution" });
    await waitForSnapshot((s) => s.phase === "executing");

    const sampler = new CorrectionSampler((m) => client.send(m), { rateHz: 30 });
    sampler.start();
    // wiggle an axis so successive samples are distinct
    const wiggle = setInterval(() => {
      sampler.input.axes = [0, Math.round(Math.sin(Date.now() / 90) * 100) / 100, 0, 0];
    }, 33);
    await new Promise((r) => setTimeout(r, 1500));
    clearInterval(wiggle);
    sampler.stop();

    const exported = await (await fetch(`${HTTP}/export`)).json();
    const streamed = exported.message_log.filter(
      (r: { message: { type: string } }) => r.message.type === "correction_stream");
    expect(streamed.length).toBeGreaterThanOrEqual(30);

    // rate observable in the event log: correction events during Executing
    const events = exported.event_log.filter(
      (e: { event: string; phase: string }) => e.event === "correction" && e.phase === "executing");
    expect(events.length).toBeGreaterThan(10);
    const span = events.at(-1).t - events[0].t;
    const rate = (events.length - 1) / span;
    console.log(`correction rate in event log: ${rate.toFixed(1)} Hz over ${span.toFixed(2)} s`);
    expect(rate).toBeGreaterThanOrEqual(20);
  });

  it("renders live segment statuses into the DOM exactly", async () => {
    const snap = store.snapshot!;
    expect(snap.segment_statuses.length).toBeGreaterThan(0);
    const dom = new Window();
    const el = dom.document.createElement("ul") as unknown as HTMLElement;
    renderSegmentList(el, snap);
    const items = Array.from(el.querySelectorAll("li"));
    expect(items.map((li) => li.dataset.status)).toEqual(snap.segment_statuses);
  });
});
