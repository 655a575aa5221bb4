// Bounding-box collection and the region inclusion rule.

import { GeometryPayload, Rect } from "./wire";
import { IDENTITY_ATTR } from "./registry";

export const REGION_THRESHOLD = 0.5;

export function overlapRatio(bbox: Rect, region: Rect): number {
  if (bbox.w <= 0 || bbox.h <= 0) {
    const cx = bbox.x + bbox.w / 2;
    const cy = bbox.y + bbox.h / 2;
    const inside =
      region.x <= cx &&
      cx <= region.x + region.w &&
      region.y <= cy &&
      cy <= region.y + region.h;
    return inside ? 1 : 0;
  }
  const ix = Math.min(bbox.x + bbox.w, region.x + region.w) - Math.max(bbox.x, region.x);
  const iy = Math.min(bbox.y + bbox.h, region.y + region.h) - Math.max(bbox.y, region.y);
  if (ix <= 0 || iy <= 0) return 0;
  return (ix * iy) / (bbox.w * bbox.h);
}

function rectOf(el: Element): Rect {
  const r = el.getBoundingClientRect();
  return { x: r.left, y: r.top, w: r.width, h: r.height };
}

/** Currently rendered elements bearing an identity, keyed by it. */
export function collectGeometry(doc: Document = document): GeometryPayload {
  const out: GeometryPayload = {};
  doc.body.querySelectorAll(`[${IDENTITY_ATTR}]`).forEach((el) => {
    const rect = rectOf(el);
    if (rect.w <= 0 && rect.h <= 0) return; // hidden or unrendered
    const id = el.getAttribute(IDENTITY_ATTR);
    if (id) out[id] = rect;
  });
  return out;
}

/** Elements the region rule would move, given live boxes. */
export function elementsInRegion(
  region: Rect,
  doc: Document = document,
  threshold = REGION_THRESHOLD,
): Element[] {
  const chosen: Element[] = [];
  doc.body.querySelectorAll(`[${IDENTITY_ATTR}]`).forEach((el) => {
    const rect = rectOf(el);
    if (rect.w <= 0 && rect.h <= 0) return;
    if (overlapRatio(rect, region) >= threshold) chosen.push(el);
  });
  return chosen;
}
