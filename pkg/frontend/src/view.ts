// DOM and canvas renderers. Everything here is a pure function of the latest
// snapshot/view frame; no client-side simulation.

import { REACH_COLORS, SEGMENT_COLORS } from "./colors.js";
import type { StateSnapshot, ViewFrame } from "./protocol.js";

export function segmentStatusList(snap: StateSnapshot): { status: string; color: string }[] {
  return snap.segment_statuses.map((status) => ({ status, color: SEGMENT_COLORS[status] }));
}

export function renderSegmentList(el: HTMLElement, snap: StateSnapshot): void {
  el.innerHTML = "";
  for (const [i, entry] of segmentStatusList(snap).entries()) {
    const li = el.ownerDocument.createElement("li");
    li.dataset.status = entry.status;
    li.style.color = entry.color;
    li.textContent = `segment ${i}: ${entry.status}`;
    el.appendChild(li);
  }
}

export function renderReachPreview(el: HTMLElement, snap: StateSnapshot): void {
  el.innerHTML = "";
  for (const point of snap.reach_preview) {
    const dot = el.ownerDocument.createElement("span");
    dot.dataset.status = point.status;
    dot.style.color = REACH_COLORS[point.status];
    dot.textContent = "●";
    el.appendChild(dot);
  }
}

export function sandpaperText(snap: StateSnapshot): string {
  const usage = snap.sandpaper.usage_seconds;
  const eff = Math.round(snap.sandpaper.efficiency * 100);
  return `sandpaper: ${usage.toFixed(1)} s in use, ${eff}% efficiency`;
}

export function coverageText(snap: StateSnapshot): string {
  const c = snap.coverage;
  return `removed ${(c.removed_fraction * 100).toFixed(1)}% | ` +
    `undersand ${(c.undersand_area * 1e4).toFixed(1)} cm² | ` +
    `oversand ${(c.oversand_area * 1e4).toFixed(1)} cm²`;
}

export function statusLine(snap: StateSnapshot): string {
  return `${snap.workflow} / ${snap.phase} | t=${snap.clock.toFixed(1)}s | ` +
    `segment ${snap.cursor.segment} @ ${(snap.cursor.s * 1000).toFixed(0)}mm | ` +
    `force ${snap.tracked_force.toFixed(1)}N`;
}

export function renderFrame(
  canvas: HTMLCanvasElement,
  frame: ViewFrame,
  markers: [number, number][] | null,
  image: CanvasImageSource | null,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  canvas.width = frame.width;
  canvas.height = frame.height;
  ctx.fillStyle = "#222";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  if (image) ctx.drawImage(image, 0, 0);

  for (const seg of frame.overlays.segments) {
    ctx.strokeStyle = SEGMENT_COLORS[seg.status] ?? seg.color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    seg.polyline.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
    ctx.stroke();
  }
  for (const point of frame.overlays.reach_points) {
    ctx.fillStyle = REACH_COLORS[point.status] ?? point.color;
    ctx.beginPath();
    ctx.arc(point.xy[0], point.xy[1], 3, 0, 2 * Math.PI);
    ctx.fill();
  }
  const handles = markers ?? frame.overlays.markers;
  if (handles.length === 4) {
    ctx.strokeStyle = "yellow";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    handles.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
    ctx.closePath();
    ctx.stroke();
    for (const [x, y] of handles) {
      ctx.beginPath();
      ctx.arc(x, y, 6, 0, 2 * Math.PI);
      ctx.stroke();
    }
  }
}
