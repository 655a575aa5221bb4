// Interaction forwarding: the slave captures user events and sends them to
// the master, where the equivalent synthetic event is dispatched on the
// hidden counterpart so the application's own handlers run.

import { EVENT_TYPES, EventType, InteractionRecord } from "./wire";
import { NodeRegistry, isElement } from "./registry";

export function captureInteractions(
  send: (record: InteractionRecord) => void,
  registry: NodeRegistry,
  doc: Document = document,
): void {
  for (const type of EVENT_TYPES) {
    doc.addEventListener(
      type,
      (event) => {
        const raw = event.target as Node | null;
        if (!raw || !isElement(raw)) return;
        const carrier = raw.closest("[data-vs-id]");
        if (!carrier) return;
        const id = carrier.getAttribute("data-vs-id");
        if (!id) return;
        // default actions would act on the mirror; the master is the one
        // that must navigate, submit, or mutate state
        if (type === "submit" || (type === "click" && carrier.closest("a,form"))) {
          event.preventDefault();
        }
        send({
          node: id,
          event_type: type,
          detail: detailOf(type, event, carrier),
        });
      },
      true,
    );
  }
  void registry;
}

function detailOf(
  type: EventType,
  event: Event,
  carrier: Element,
): Record<string, unknown> {
  const detail: Record<string, unknown> = {};
  if (type === "input" || type === "change") {
    const field = carrier as HTMLInputElement;
    if ("value" in field) detail.value = field.value;
    if (field.type === "checkbox" || field.type === "radio") {
      detail.checked = field.checked;
    }
  }
  if (type === "keydown") {
    const key = event as KeyboardEvent;
    detail.key = key.key;
    detail.ctrl = key.ctrlKey;
    detail.shift = key.shiftKey;
  }
  return detail;
}

export function dispatchInteraction(
  record: InteractionRecord,
  registry: NodeRegistry,
  doc: Document = document,
): boolean {
  const node = registry.get(record.node);
  if (!node || !isElement(node)) return false;
  const win = doc.defaultView ?? window;
  switch (record.event_type) {
    case "click": {
      node.dispatchEvent(
        new win.MouseEvent("click", { bubbles: true, cancelable: true }),
      );
      return true;
    }
    case "input":
    case "change": {
      const field = node as HTMLInputElement;
      if ("value" in field && typeof record.detail.value === "string") {
        field.value = record.detail.value;
      }
      if (typeof record.detail.checked === "boolean") {
        field.checked = record.detail.checked;
      }
      node.dispatchEvent(new win.Event(record.event_type, { bubbles: true }));
      return true;
    }
    case "submit": {
      node.dispatchEvent(
        new win.Event("submit", { bubbles: true, cancelable: true }),
      );
      return true;
    }
    case "keydown": {
      node.dispatchEvent(
        new win.KeyboardEvent("keydown", {
          bubbles: true,
          cancelable: true,
          key: String(record.detail.key ?? ""),
          ctrlKey: Boolean(record.detail.ctrl),
          shiftKey: Boolean(record.detail.shift),
        }),
      );
      return true;
    }
    default:
      return false;
  }
}
