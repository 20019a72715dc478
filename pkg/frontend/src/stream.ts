// SSE reply stream with reconnect + backoff. The EventSource constructor is
// injectable so tests can drive frames by hand.

import type { AgentReply } from "./types.js";

export interface EventSourceLike {
  onmessage: ((ev: { data: string }) => void) | null;
  onerror: ((ev: unknown) => void) | null;
  onopen: ((ev: unknown) => void) | null;
  close(): void;
}

export type EventSourceFactory = (url: string) => EventSourceLike;

export interface StreamHandlers {
  onFrame(reply: AgentReply): void;
  onStatus(status: "live" | "retrying"): void;
  onReconnect(): void; // caller reconciles missed replies via GET
}

const BACKOFF_START_MS = 1000;
const BACKOFF_CAP_MS = 15000;

export class ReplyStream {
  private source: EventSourceLike | null = null;
  private backoff = BACKOFF_START_MS;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private disposed = false;
  private everConnected = false;

  constructor(
    private url: string,
    private handlers: StreamHandlers,
    private factory: EventSourceFactory = (u) => new EventSource(u) as EventSourceLike,
  ) {}

  connect(): void {
    if (this.disposed) return;
    this.source = this.factory(this.url);
    this.source.onopen = () => {
      this.backoff = BACKOFF_START_MS;
      this.handlers.onStatus("live");
      if (this.everConnected) {
        this.handlers.onReconnect();
      }
      this.everConnected = true;
    };
    this.source.onmessage = (ev) => {
      this.handlers.onFrame(JSON.parse(ev.data) as AgentReply);
    };
    this.source.onerror = () => {
      this.handlers.onStatus("retrying");
      this.source?.close();
      this.source = null;
      if (this.disposed) return;
      this.timer = setTimeout(() => this.connect(), this.backoff);
      this.backoff = Math.min(this.backoff * 2, BACKOFF_CAP_MS);
    };
  }

  dispose(): void {
    this.disposed = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.source?.close();
    this.source = null;
  }
}
