// Hub connection: hello on open, JSON-lines messages, exponential-backoff
// reconnect. The socket constructor is injectable so tests can run the full
// stack against an in-memory pipe.

import { MessageKind, SyncMessage, decode, encode } from "./wire";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface TransportOptions {
  session: string;
  role: "master" | "slave";
  url: string;
  socketFactory?: SocketFactory;
  onMessage: (msg: SyncMessage) => void;
  onReconnect?: () => void;
  maxBackoffMs?: number;
}

export class Transport {
  private opts: TransportOptions;
  private socket: SocketLike | null = null;
  private seq = 0;
  private attempts = 0;
  private closed = false;

  constructor(opts: TransportOptions) {
    this.opts = opts;
  }

  connect(): void {
    const factory =
      this.opts.socketFactory ??
      ((url: string) => new WebSocket(url) as unknown as SocketLike);
    const socket = factory(this.opts.url);
    this.socket = socket;
    socket.onopen = () => {
      const reconnecting = this.attempts > 0;
      this.attempts = 0;
      this.send("hello", { role: this.opts.role });
      if (reconnecting && this.opts.onReconnect) this.opts.onReconnect();
    };
    socket.onmessage = (ev) => {
      let msg: SyncMessage;
      try {
        msg = decode(ev.data);
      } catch (exc) {
        console.warn("screensplit: dropping malformed message", exc);
        return;
      }
      this.opts.onMessage(msg);
    };
    socket.onclose = () => {
      this.socket = null;
      if (!this.closed) this.scheduleReconnect();
    };
    socket.onerror = () => {
      /* onclose follows and handles retry */
    };
  }

  private scheduleReconnect(): void {
    const cap = this.opts.maxBackoffMs ?? 10_000;
    const delay = Math.min(500 * 2 ** this.attempts, cap);
    this.attempts += 1;
    setTimeout(() => {
      if (!this.closed) this.connect();
    }, delay);
  }

  send(kind: MessageKind, payload: Record<string, unknown>): number {
    this.seq += 1;
    const msg: SyncMessage = {
      session: this.opts.session,
      seq: this.seq,
      kind,
      payload,
    };
    if (this.socket) {
      try {
        this.socket.send(encode(msg));
      } catch {
        /* reconnect will resync */
      }
    }
    return this.seq;
  }

  close(): void {
    this.closed = true;
    if (this.socket) this.socket.close();
  }
}
