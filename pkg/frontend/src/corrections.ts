// Operator correction sampling: keyboard (and optionally gamepad) state is
// sampled at a fixed rate and streamed to the server. Released inputs spring
// back to zero; the backtrack button maps to the backtrack flag; coupled mode
// exposes a single abrasiveness axis.

import { correctionMessage, type CorrectionStream } from "./protocol.js";

export type CorrectionMode = "coupled" | "independent";

export interface InputState {
  axes: [number, number, number, number]; // feed, force, pitch, lateral
  coupled: number;
  backtrack: boolean;
}

export function zeroInput(): InputState {
  return { axes: [0, 0, 0, 0], coupled: 0, backtrack: false };
}

// key -> [axis index, direction]; held keys drive the axis, release zeroes it
const KEY_AXES: Record<string, [number, number]> = {
  ArrowUp: [0, 1],
  ArrowDown: [0, -1],
  w: [1, 1],
  s: [1, -1],
  q: [2, -1],
  e: [2, 1],
  a: [3, -1],
  d: [3, 1],
};
const BACKTRACK_KEY = "b";

export class CorrectionSampler {
  readonly rateHz: number;
  mode: CorrectionMode;
  input: InputState = zeroInput();
  sent = 0;

  private send: (msg: CorrectionStream) => void;
  private timer: ReturnType<typeof setInterval> | null = null;
  private held = new Set<string>();

  constructor(send: (msg: CorrectionStream) => void,
              opts: { rateHz?: number; mode?: CorrectionMode } = {}) {
    this.send = send;
    this.rateHz = opts.rateHz ?? 30;
    this.mode = opts.mode ?? "independent";
  }

  start(): void {
    if (this.timer !== null) return;
    this.timer = setInterval(() => this.sample(), 1000 / this.rateHz);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
    // leave the mailbox at rest rather than latched on the last value
    this.input = zeroInput();
    this.send(this.message());
  }

  get running(): boolean {
    return this.timer !== null;
  }

  message(): CorrectionStream {
    if (this.mode === "coupled") {
      return correctionMessage("coupled", this.input.coupled, this.input.backtrack);
    }
    return correctionMessage("independent", this.input.axes, this.input.backtrack);
  }

  sample(): void {
    this.send(this.message());
    this.sent += 1;
  }

  keyDown(key: string): void {
    const k = key.length === 1 ? key.toLowerCase() : key;
    if (k === BACKTRACK_KEY) {
      this.input.backtrack = true;
      return;
    }
    const bind = KEY_AXES[k];
    if (!bind) return;
    this.held.add(k);
    this.applyHeld();
  }

  keyUp(key: string): void {
    const k = key.length === 1 ? key.toLowerCase() : key;
    if (k === BACKTRACK_KEY) {
      this.input.backtrack = false;
      return;
    }
    if (this.held.delete(k)) this.applyHeld();
  }

  private applyHeld(): void {
    const axes: [number, number, number, number] = [0, 0, 0, 0];
    for (const k of this.held) {
      const [axis, dir] = KEY_AXES[k];
      axes[axis] += dir;
    }
    for (let i = 0; i < 4; i++) axes[i] = Math.min(1, Math.max(-1, axes[i]));
    this.input.axes = axes;
    // coupled mode: one input axis drives the whole correction
    this.input.coupled = axes[1] !== 0 ? axes[1] : axes[0];
  }

  attachKeyboard(target: { addEventListener: Function }): void {
    target.addEventListener("keydown", (e: KeyboardEvent) => this.keyDown(e.key));
    target.addEventListener("keyup", (e: KeyboardEvent) => this.keyUp(e.key));
  }

  // Optional gamepad: left stick Y -> force, X -> lateral, triggers -> pitch,
  // right stick Y -> feed, button 0 -> backtrack.
  pollGamepad(nav: { getGamepads?: () => (Gamepad | null)[] } = globalThis.navigator): void {
    const pads = nav?.getGamepads?.() ?? [];
    const gp = pads.find(Boolean);
    if (!gp) return;
    const dead = (x: number) => (Math.abs(x) < 0.08 ? 0 : x);
    this.input.axes = [
      dead(-(gp.axes?.[3] ?? 0)),
      dead(-(gp.axes?.[1] ?? 0)),
      (gp.buttons?.[7]?.value ?? 0) - (gp.buttons?.[6]?.value ?? 0),
      dead(gp.axes?.[0] ?? 0),
    ];
    this.input.coupled = this.input.axes[1];
    this.input.backtrack = gp.buttons?.[0]?.pressed ?? false;
  }
}
