// @vitest-environment happy-dom
import { describe, expect, it } from "vitest";

import { renderReachPreview, renderSegmentList, sandpaperText } from "../src/view.js";
import { fakeSnapshot } from "./store.test.js";

describe("DOM rendering", () => {
  it("segment colors in the DOM match snapshot statuses exactly", () => {
    const snap = fakeSnapshot({
      segment_statuses: ["completed", "reachable", "unreachable", "reachable"],
    });
    const el = document.createElement("ul");
    renderSegmentList(el, snap);
    const items = Array.from(el.querySelectorAll("li"));
    expect(items.map((li) => li.dataset.status)).toEqual(snap.segment_statuses);
    expect(items.map((li) => li.style.color)).toEqual(["gray", "blue", "red", "blue"]);
  });

  it("reachability grid points render green/red", () => {
    const snap = fakeSnapshot({
      reach_preview: [
        { u: 0, v: 0, status: "reachable" },
        { u: 0.1, v: 0, status: "unreachable" },
      ],
    });
    const el = document.createElement("div");
    renderReachPreview(el, snap);
    const dots = Array.from(el.querySelectorAll("span"));
    expect(dots.map((d) => d.style.color)).toEqual(["green", "red"]);
  });

  it("replaying the same snapshot yields identical DOM", () => {
    const snap = fakeSnapshot({ segment_statuses: ["reachable", "completed"] });
    const a = document.createElement("ul");
    const b = document.createElement("ul");
    renderSegmentList(a, snap);
    renderSegmentList(b, snap);
    expect(a.innerHTML).toBe(b.innerHTML);
  });

  it("sandpaper monitor shows usage from the snapshot", () => {
    const snap = fakeSnapshot({ sandpaper: { usage_seconds: 123.4, efficiency: 0.76 } });
    expect(sandpaperText(snap)).toContain("123.4 s");
    expect(sandpaperText(snap)).toContain("76%");
  });
});
