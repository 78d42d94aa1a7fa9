// WebSocket client for the gateway. One socket, latest-wins ingest into the
// store; a dropped connection flips the store's connected flag immediately so
// the banner shows within the 1 s budget.

import { parseServerMessage, type ClientMessage } from "./protocol.js";
import type { SessionStore } from "./store.js";

type SocketLike = {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
};

export class GatewayClient {
  private url: string;
  private store: SessionStore;
  private factory: (url: string) => SocketLike;
  private socket: SocketLike | null = null;

  constructor(url: string, store: SessionStore,
              factory?: (url: string) => SocketLike) {
    this.url = url;
    this.store = store;
    this.factory = factory ?? ((u) => new WebSocket(u) as unknown as SocketLike);
  }

  connect(): void {
    const ws = this.factory(this.url);
    this.socket = ws;
    ws.onopen = () => this.store.setConnected(true);
    ws.onclose = () => this.store.setConnected(false);
    ws.onmessage = (ev) => {
      const msg = parseServerMessage(String(ev.data));
      if (msg) this.store.ingest(msg);
    };
  }

  send(msg: ClientMessage): void {
    if (!this.socket || !this.store.connected) return; // corrections simply cease
    this.socket.send(JSON.stringify(msg));
  }

  close(): void {
    this.socket?.close();
    this.socket = null;
  }
}
