// Latest-wins session state: the render loop reads whatever arrived last,
// decoupled from network receipt.

import type { ServerMessage, StateSnapshot, ViewFrame } from "./protocol.js";

export type StoreListener = (store: SessionStore) => void;

export class SessionStore {
  snapshot: StateSnapshot | null = null;
  view: ViewFrame | null = null;
  connected = false;
  lastError: string | null = null;
  droppedFrames = 0;

  private lastSeq = -1;
  private listeners = new Set<StoreListener>();

  subscribe(fn: StoreListener): () => void {
    this.listeners.add(fn);
    return () => this.listeners.delete(fn);
  }

  private notify(): void {
    for (const fn of this.listeners) fn(this);
  }

  setConnected(connected: boolean): void {
    this.connected = connected;
    this.notify();
  }

  ingest(msg: ServerMessage): void {
    if (this.lastSeq >= 0 && msg.seq > this.lastSeq + 1) {
      this.droppedFrames += msg.seq - this.lastSeq - 1;
    }
    if (msg.seq <= this.lastSeq) {
      return; // stale frame, latest already applied
    }
    this.lastSeq = msg.seq;
    if (msg.type === "state_snapshot") {
      this.snapshot = msg;
    } else if (msg.type === "view_frame") {
      this.view = msg;
    } else {
      this.lastError = msg.message;
    }
    this.notify();
  }
}
