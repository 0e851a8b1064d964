/** WebSocket link with newline-JSON framing and backoff reconnect. */

import { LineBuffer } from "./protocol.js";

export interface LinkCallbacks {
  onLine: (line: string) => void;
  onOpen: () => void;
  onDown: (willRetry: boolean) => void;
}

const BACKOFF_MS = [500, 1000, 2000, 4000, 8000];

export class WsLink {
  private ws: WebSocket | null = null;
  private buffer = new LineBuffer();
  private attempts = 0;
  private stopped = false;
  private outbox: string[] = [];

  constructor(
    private readonly url: string,
    private readonly callbacks: LinkCallbacks,
  ) {}

  start(): void {
    this.stopped = false;
    this.connect();
  }

  private connect(): void {
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.attempts = 0;
      this.buffer = new LineBuffer();
      this.callbacks.onOpen();
      for (const line of this.outbox.splice(0)) ws.send(line);
    };
    ws.onmessage = (ev) => {
      for (const line of this.buffer.feed(String(ev.data))) {
        this.callbacks.onLine(line);
      }
    };
    ws.onclose = () => {
      this.ws = null;
      if (this.stopped) return;
      const delay = BACKOFF_MS[Math.min(this.attempts, BACKOFF_MS.length - 1)];
      this.attempts += 1;
      this.callbacks.onDown(true);
      setTimeout(() => {
        if (!this.stopped) this.connect();
      }, delay);
    };
    ws.onerror = () => {
      // onclose follows; nothing else to do here
    };
  }

  send(line: string): void {
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(line);
    } else if (this.outbox.length < 64) {
      this.outbox.push(line);
    }
  }

  stop(): void {
    this.stopped = true;
    this.callbacks.onDown(false);
    this.ws?.close();
  }
}
