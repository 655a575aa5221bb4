// Per-page realms and an in-memory hub so the full runtime stack runs
// without a browser or a network.

import { JSDOM } from "jsdom";
import { SocketLike } from "../src/transport";
import { SyncMessage, decode } from "../src/wire";

export function page(bodyHtml: string, opts: { role?: string; head?: string } = {}) {
  const role = opts.role ?? "master";
  const html =
    "<!DOCTYPE html><html><head>" +
    (opts.head ?? "") +
    `<script type="application/json" id="vs-config">` +
    `{"session":"t1","hub":"ws://test/sync","role":"${role}"}</script>` +
    `</head><body>${bodyHtml}</body></html>`;
  const dom = new JSDOM(html, { pretendToBeVisual: true });
  return dom.window.document;
}

export class FakeSocket implements SocketLike {
  sent: string[] = [];
  onopen: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: string }) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;
  deliverTo: ((data: string) => void) | null = null;

  send(data: string): void {
    this.sent.push(data);
    if (this.deliverTo) this.deliverTo(data);
  }

  close(): void {
    if (this.onclose) this.onclose();
  }

  open(): void {
    if (this.onopen) this.onopen();
  }

  receive(data: string): void {
    if (this.onmessage) this.onmessage({ data });
  }

  sentMessages(): SyncMessage[] {
    return this.sent.map((s) => decode(s));
  }
}

/**
 * Relay every frame between two sockets like the hub does, with optional
 * interception (geometry/split_request stay engine-side in production).
 */
export class MiniHub {
  master = new FakeSocket();
  slave = new FakeSocket();
  intercepted: SyncMessage[] = [];
  interceptKinds: Set<string>;
  transcript: SyncMessage[] = [];

  constructor(interceptKinds: string[] = ["geometry", "split_request"]) {
    this.interceptKinds = new Set(interceptKinds);
    this.master.deliverTo = (data) => this.route(data, this.slave);
    this.slave.deliverTo = (data) => this.route(data, this.master);
  }

  private route(data: string, peer: FakeSocket): void {
    const msg = decode(data);
    this.transcript.push(msg);
    if (this.interceptKinds.has(msg.kind)) {
      this.intercepted.push(msg);
      return;
    }
    peer.receive(data);
  }

  connect(): void {
    this.master.open();
    this.slave.open();
  }
}

export function settle(): Promise<void> {
  // one macrotask: lets MutationObserver callbacks and flush microtasks run
  return new Promise((resolve) => setTimeout(resolve, 0));
}

/** jsdom computes no layout; pin boxes per element for geometry tests. */
export function stubRect(
  el: Element,
  rect: { x: number; y: number; w: number; h: number },
): void {
  (el as HTMLElement).getBoundingClientRect = () =>
    ({
      x: rect.x,
      y: rect.y,
      left: rect.x,
      top: rect.y,
      right: rect.x + rect.w,
      bottom: rect.y + rect.h,
      width: rect.w,
      height: rect.h,
      toJSON: () => ({}),
    }) as DOMRect;
}
