// Which workflow actions are valid for the current snapshot. Buttons for
// anything else stay disabled; the server would reject them anyway.

import type { StateSnapshot } from "./protocol.js";

export function enabledActions(snap: StateSnapshot | null): string[] {
  if (!snap) return [];
  const structured = snap.workflow === "structured";
  switch (snap.phase) {
    case "positioning":
      return ["begin_scan"];
    case "scanning":
      return ["scan_complete"];
    case "registering":
      return structured ? ["auto_register", "confirm_fit"] : [];
    case "reachability_review":
      return structured ? ["start_execution", "reposition"] : ["start_execution"];
    case "executing":
      return ["pause", "request_sandpaper_change"];
    case "paused":
      return ["resume", "request_sandpaper_change"];
    case "sandpaper_change":
      return ["sandpaper_changed"];
    case "repositioning":
      return ["workpiece_moved"];
    case "complete":
      return structured ? ["reposition"] : ["adjust"];
  }
}

export function markersEditable(snap: StateSnapshot | null): boolean {
  return (snap?.workflow === "unstructured" && snap.phase === "reachability_review") ?? false;
}

export function parametersEditable(snap: StateSnapshot | null): boolean {
  return markersEditable(snap);
}

export function nudgeEnabled(snap: StateSnapshot | null): boolean {
  return (snap?.workflow === "structured"
    && snap.phase === "registering"
    && snap.registration !== null
    && !snap.registration.accepted) ?? false;
}

export function correctionsActive(snap: StateSnapshot | null): boolean {
  return snap?.phase === "executing";
}
