// Console wiring: store + socket + input models + DOM.

import { GatewayClient } from "./net.js";
import { SessionStore } from "./store.js";
import { CorrectionSampler } from "./corrections.js";
import { MarkerDragModel } from "./markers.js";
import { clampParams, type NominalParams, type StateSnapshot } from "./protocol.js";
import {
  correctionsActive, enabledActions, markersEditable, nudgeEnabled, parametersEditable,
} from "./controls.js";
import {
  coverageText, renderFrame, renderReachPreview, renderSegmentList, sandpaperText, statusLine,
} from "./view.js";

const WS_URL = (window as { SANDBENCH_WS?: string }).SANDBENCH_WS
  ?? `ws://${location.hostname || "localhost"}:8734/ws`;

const $ = (id: string) => document.getElementById(id)!;

const store = new SessionStore();
const client = new GatewayClient(WS_URL, store);
const sampler = new CorrectionSampler((msg) => client.send(msg));
sampler.attachKeyboard(window);

const markers = new MarkerDragModel((msg) => {
  client.send(msg);
  client.send({ type: "request_view" });
});

const canvas = $("view") as HTMLCanvasElement;
let frameImage: HTMLImageElement | null = null;
let lastPngB64 = "";
let hadError = false;

function actionPayload(action: string): Record<string, unknown> | undefined {
  if (action === "workpiece_moved") {
    const raw = (window as { SANDBENCH_NEW_POSE?: unknown }).SANDBENCH_NEW_POSE;
    return raw ? { pose: raw } : undefined;
  }
  return undefined;
}

function renderButtons(snap: StateSnapshot | null): void {
  const bar = $("actions");
  bar.innerHTML = "";
  for (const action of enabledActions(snap)) {
    const btn = document.createElement("button");
    btn.textContent = action.replace(/_/g, " ");
    btn.dataset.action = action;
    btn.onclick = () => {
      client.send({ type: "phase_action", action, payload: actionPayload(action) });
      client.send({ type: "request_view" });
    };
    bar.appendChild(btn);
  }
}

function currentParams(): NominalParams {
  return clampParams({
    passes: Number(($("passes") as HTMLInputElement).value),
    orientation: ($("orientation") as HTMLSelectElement).value as "horizontal" | "vertical",
    force: Number(($("force") as HTMLInputElement).value),
    feed: Number(($("feed") as HTMLInputElement).value),
    pitch: Number(($("pitch") as HTMLInputElement).value),
  });
}

function sendParams(): void {
  client.send({ type: "parameter_update", params: currentParams() });
}

for (const id of ["passes", "force", "feed", "pitch"]) {
  ($(id) as HTMLInputElement).onchange = sendParams;
}
($("orientation") as HTMLSelectElement).onchange = sendParams;

for (const [id, translation, rotation] of [
  ["nudge-xp", [0.002, 0, 0], [0, 0, 0]], ["nudge-xm", [-0.002, 0, 0], [0, 0, 0]],
  ["nudge-yp", [0, 0.002, 0], [0, 0, 0]], ["nudge-ym", [0, -0.002, 0], [0, 0, 0]],
  ["nudge-zp", [0, 0, 0.002], [0, 0, 0]], ["nudge-zm", [0, 0, -0.002], [0, 0, 0]],
  ["nudge-rp", [0, 0, 0], [0, 0, 0.01]], ["nudge-rm", [0, 0, 0], [0, 0, -0.01]],
] as [string, [number, number, number], [number, number, number]][]) {
  $(id).onclick = () => client.send({ type: "pose_nudge", translation, rotation });
}

// marker dragging on the canvas
let dragging = -1;
canvas.addEventListener("pointerdown", (e) => {
  if (!markersEditable(store.snapshot)) return;
  const rect = canvas.getBoundingClientRect();
  dragging = markers.hitTest(e.clientX - rect.left, e.clientY - rect.top);
});
canvas.addEventListener("pointermove", (e) => {
  if (dragging < 0 || !markersEditable(store.snapshot)) return;
  const rect = canvas.getBoundingClientRect();
  markers.moveTo(dragging, e.clientX - rect.left, e.clientY - rect.top);
  redraw();
});
canvas.addEventListener("pointerup", () => {
  if (dragging >= 0) markers.flush();
  dragging = -1;
});

function redraw(): void {
  if (!store.view) return;
  const editable = markersEditable(store.snapshot);
  renderFrame(canvas, store.view, editable ? markers.pixels : null, frameImage);
}

function render(): void {
  const snap = store.snapshot;
  $("banner").style.display = store.connected ? "none" : "block";
  renderButtons(snap);
  if (!snap) return;

  $("status").textContent = statusLine(snap);
  $("sandpaper").textContent = sandpaperText(snap);
  $("coverage").textContent = coverageText(snap);
  renderSegmentList($("segments"), snap);
  renderReachPreview($("reach"), snap);

  $("sliders").style.display = parametersEditable(snap) ? "block" : "none";
  $("nudges").style.display = nudgeEnabled(snap) ? "block" : "none";
  $("summary").style.display = snap.phase === "complete" ? "block" : "none";
  if (snap.phase === "complete") {
    $("summary").textContent = `task complete - ${coverageText(snap)}`;
  }
  if (snap.registration) {
    $("registration").textContent =
      `fit: rms ${(snap.registration.rms_residual * 1000).toFixed(2)} mm, ` +
      `inliers ${(snap.registration.inlier_fraction * 100).toFixed(0)}%` +
      (snap.registration.accepted ? " (confirmed)" : "");
  }

  if (store.lastError && !hadError) {
    hadError = true;
    $("toast").textContent = store.lastError;
    $("toast").style.display = "block";
    markers.snapBack();
    setTimeout(() => {
      $("toast").style.display = "none";
      hadError = false;
      store.lastError = null;
    }, 2500);
  } else if (snap.quad) {
    markers.confirm();
  }

  if (correctionsActive(snap)) {
    if (!sampler.running) sampler.start();
    sampler.pollGamepad();
  } else if (sampler.running) {
    sampler.stop();
  }

  if (store.view && store.view.png_base64 !== lastPngB64) {
    lastPngB64 = store.view.png_base64;
    const img = new Image();
    img.onload = () => {
      frameImage = img;
      redraw();
    };
    img.src = `data:image/png;base64,${lastPngB64}`;
  } else {
    redraw();
  }
}

store.subscribe(render);
client.connect();
client.send({ type: "request_view" });
setInterval(() => {
  if (store.connected && store.snapshot?.phase === "executing") {
    client.send({ type: "request_view" });
  }
}, 1000);
