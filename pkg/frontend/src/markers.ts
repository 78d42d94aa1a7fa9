// Four draggable marker handles over the camera view. Drags send a debounced
// MarkerUpdate; the server is authoritative, so a rejected update snaps the
// handles back to the last accepted positions.

import type { MarkerUpdate } from "./protocol.js";

export function debounced<A extends unknown[]>(fn: (...args: A) => void, ms: number) {
  let timer: ReturnType<typeof setTimeout> | null = null;
  let pending: A | null = null;
  const wrapped = (...args: A) => {
    pending = args;
    if (timer !== null) clearTimeout(timer);
    timer = setTimeout(() => {
      timer = null;
      const args2 = pending!;
      pending = null;
      fn(...args2);
    }, ms);
  };
  wrapped.flush = () => {
    if (timer !== null) {
      clearTimeout(timer);
      timer = null;
      const args = pending!;
      pending = null;
      fn(...args);
    }
  };
  wrapped.cancel = () => {
    if (timer !== null) clearTimeout(timer);
    timer = null;
    pending = null;
  };
  return wrapped;
}

export const DEFAULT_MARKERS: [number, number][] = [
  [200, 320], [340, 320], [340, 210], [200, 210],
];

export class MarkerDragModel {
  pixels: [number, number][];
  private accepted: [number, number][];
  private sendNow: (msg: MarkerUpdate) => void;
  private debouncedSend: ReturnType<typeof debounced<[]>>;
  updates = 0;

  constructor(send: (msg: MarkerUpdate) => void,
              opts: { debounceMs?: number; initial?: [number, number][] } = {}) {
    this.sendNow = send;
    this.pixels = (opts.initial ?? DEFAULT_MARKERS).map((p) => [...p] as [number, number]);
    this.accepted = this.pixels.map((p) => [...p] as [number, number]);
    this.debouncedSend = debounced(() => {
      this.updates += 1;
      this.sendNow({ type: "marker_update", pixels: this.pixels.map((p) => [...p] as [number, number]) });
    }, opts.debounceMs ?? 150);
  }

  moveTo(index: number, x: number, y: number): void {
    this.pixels[index] = [x, y];
    this.debouncedSend();
  }

  flush(): void {
    this.debouncedSend.flush();
  }

  /** Server confirmed a quad for our last update. */
  confirm(): void {
    this.accepted = this.pixels.map((p) => [...p] as [number, number]);
  }

  /** Server rejected the update (e.g. a marker missed the surface). */
  snapBack(): void {
    this.debouncedSend.cancel();
    this.pixels = this.accepted.map((p) => [...p] as [number, number]);
  }

  /** Index of the handle within `radius` of (x, y), or -1. */
  hitTest(x: number, y: number, radius = 12): number {
    for (let i = 0; i < this.pixels.length; i++) {
      const dx = this.pixels[i][0] - x;
      const dy = this.pixels[i][1] - y;
      if (dx * dx + dy * dy <= radius * radius) return i;
    }
    return -1;
  }
}
