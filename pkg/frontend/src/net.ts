// WebSocket session with automatic reconnect. The socket constructor and
// timer are injectable so tests can drive it without a browser.

import { ClientMsg, ServerMsg, encodeClientMsg, parseServerMsg } from "./protocol";
import { ConnectionStatus } from "./viewmodel";

export interface WsLike {
  readyState: number;
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type WsFactory = (url: string) => WsLike;

export interface SessionHandlers {
  onMsg: (msg: ServerMsg) => void;
  onStatus: (status: ConnectionStatus) => void;
}

export interface SessionOptions {
  factory?: WsFactory;
  backoffMs?: number[];
  schedule?: (fn: () => void, ms: number) => void;
}

const OPEN = 1;
const DEFAULT_BACKOFF = [500, 1000, 2000, 4000, 8000];

export class Session {
  readonly url: string;
  attempts = 0;
  controlling = false;

  private handlers: SessionHandlers;
  private factory: WsFactory;
  private backoff: number[];
  private schedule: (fn: () => void, ms: number) => void;
  private ws: WsLike | null = null;
  private closedByUser = false;

  constructor(url: string, handlers: SessionHandlers, opts: SessionOptions = {}) {
    this.url = url;
    this.handlers = handlers;
    this.factory = opts.factory ?? ((u) => new WebSocket(u) as unknown as WsLike);
    this.backoff = opts.backoffMs ?? DEFAULT_BACKOFF;
    this.schedule = opts.schedule ?? ((fn, ms) => setTimeout(fn, ms));
  }

  open() {
    this.closedByUser = false;
    this.handlers.onStatus(this.attempts === 0 ? "connecting" : "retrying");
    let ws: WsLike;
    try {
      ws = this.factory(this.url);
    } catch {
      this.retryLater();
      return;
    }
    this.ws = ws;
    ws.onopen = () => {
      this.attempts = 0;
      this.handlers.onStatus("connected");
    };
    ws.onmessage = (ev) => {
      const msg = parseServerMsg(String(ev.data));
      if (!msg) return; // incomplete or foreign frame: never rendered
      if (msg.type === "ack" && msg.what === "claim_control") {
        this.controlling = true;
        this.handlers.onStatus("controlling");
      }
      this.handlers.onMsg(msg);
    };
    ws.onerror = () => {};
    ws.onclose = () => {
      this.ws = null;
      this.controlling = false;
      if (this.closedByUser) {
        this.handlers.onStatus("closed");
      } else {
        this.retryLater();
      }
    };
  }

  private retryLater() {
    const wait = this.backoff[Math.min(this.attempts, this.backoff.length - 1)]!;
    this.attempts += 1;
    this.handlers.onStatus("retrying");
    this.schedule(() => {
      if (!this.closedByUser) this.open();
    }, wait);
  }

  /** Send when connected; commands are dropped, not queued, while down. */
  send(msg: ClientMsg): boolean {
    if (!this.ws || this.ws.readyState !== OPEN) return false;
    this.ws.send(encodeClientMsg(msg));
    return true;
  }

  claimControl(): boolean {
    return this.send({ type: "claim_control" });
  }

  close() {
    this.closedByUser = true;
    this.ws?.close();
  }
}
