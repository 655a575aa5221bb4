// Wire format shared with the hub: one JSON object per message.

export type MessageKind =
  | "hello"
  | "bye"
  | "changes"
  | "interaction"
  | "geometry"
  | "split_request"
  | "resync";

export interface SyncMessage {
  session: string;
  seq: number;
  kind: MessageKind;
  payload: Record<string, unknown>;
}

export type ChangeType =
  | "childAdded"
  | "childRemoved"
  | "attributeChanged"
  | "attributeRemoved"
  | "textChanged"
  | "reparented";

export interface ChangeRecord {
  type: ChangeType;
  node: string;
  parent?: string | null;
  prev_sibling?: string | null;
  attribute?: string;
  value?: string;
  subtree?: string;
  text_ids?: string[];
}

export type EventType = "click" | "input" | "change" | "submit" | "keydown";

export const EVENT_TYPES: readonly EventType[] = [
  "click",
  "input",
  "change",
  "submit",
  "keydown",
];

export interface InteractionRecord {
  node: string;
  event_type: EventType;
  detail: Record<string, unknown>;
}

export interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
}

export type GeometryPayload = Record<string, Rect>;

const KINDS: readonly MessageKind[] = [
  "hello",
  "bye",
  "changes",
  "interaction",
  "geometry",
  "split_request",
  "resync",
];

export function encode(msg: SyncMessage): string {
  // key order mirrors the hub's encoder: session, seq, kind, payload
  return JSON.stringify({
    session: msg.session,
    seq: msg.seq,
    kind: msg.kind,
    payload: msg.payload,
  });
}

export function decode(data: string): SyncMessage {
  let raw: unknown;
  try {
    raw = JSON.parse(data);
  } catch (exc) {
    throw new Error(`malformed message: ${exc}`);
  }
  if (typeof raw !== "object" || raw === null) {
    throw new Error("message must be a JSON object");
  }
  const obj = raw as Record<string, unknown>;
  const kind = obj.kind as MessageKind;
  if (!KINDS.includes(kind)) {
    throw new Error(`unknown message kind: ${String(obj.kind)}`);
  }
  if (typeof obj.session !== "string" || !obj.session) {
    throw new Error("missing session");
  }
  if (typeof obj.seq !== "number") {
    throw new Error("missing seq");
  }
  const payload = (obj.payload ?? {}) as Record<string, unknown>;
  return { session: obj.session, seq: obj.seq, kind, payload };
}

export function recordsOf(msg: SyncMessage): ChangeRecord[] {
  const raw = (msg.payload.records ?? []) as ChangeRecord[];
  return raw.map((r) => {
    if (!r || typeof r.node !== "string" || typeof r.type !== "string") {
      throw new Error("bad change record");
    }
    return r;
  });
}

export function changesPayload(
  records: ChangeRecord[],
  snapshot = false,
): Record<string, unknown> {
  const payload: Record<string, unknown> = { records };
  if (snapshot) payload.snapshot = true;
  return payload;
}
