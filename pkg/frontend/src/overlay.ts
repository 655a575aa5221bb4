// Region-selection overlay: the user drags a rectangle over the live page,
// sees which elements would move, and confirms by releasing. Escape or a
// zero-size rectangle cancels without sending anything.

import { Rect } from "./wire";
import { REGION_THRESHOLD, collectGeometry, elementsInRegion } from "./geometry";

export interface SelectionOutcome {
  region: Rect;
  geometry: Record<string, Rect>;
}

const HIGHLIGHT_CLASS = "vs-region-candidate";
const STYLE_ID = "vs-overlay-style";

function ensureStyle(doc: Document): void {
  if (doc.getElementById(STYLE_ID)) return;
  const style = doc.createElement("style");
  style.id = STYLE_ID;
  style.textContent =
    `.${HIGHLIGHT_CLASS}{outline:2px solid #00bfff !important;` +
    `outline-offset:2px !important;}`;
  doc.head.appendChild(style);
}

export class RegionSelector {
  private doc: Document;
  private onConfirm: (outcome: SelectionOutcome) => void;
  private overlay: HTMLDivElement | null = null;
  private box: HTMLDivElement | null = null;
  private origin: { x: number; y: number } | null = null;
  private highlighted: Element[] = [];
  private threshold: number;

  constructor(
    onConfirm: (outcome: SelectionOutcome) => void,
    doc: Document = document,
    threshold = REGION_THRESHOLD,
  ) {
    this.doc = doc;
    this.onConfirm = onConfirm;
    this.threshold = threshold;
  }

  get active(): boolean {
    return this.overlay !== null;
  }

  start(): void {
    if (this.overlay) return;
    ensureStyle(this.doc);
    const overlay = this.doc.createElement("div");
    overlay.id = "vs-region-overlay";
    Object.assign(overlay.style, {
      position: "fixed",
      inset: "0",
      cursor: "crosshair",
      zIndex: "2147483647",
      background: "rgba(0,0,0,0.15)",
    });
    const box = this.doc.createElement("div");
    Object.assign(box.style, {
      position: "fixed",
      border: "2px dashed #00bfff",
      background: "rgba(0,191,255,0.10)",
      pointerEvents: "none",
      display: "none",
    });
    overlay.appendChild(box);
    this.doc.body.appendChild(overlay);
    this.overlay = overlay;
    this.box = box;

    overlay.addEventListener("pointerdown", this.onDown);
    overlay.addEventListener("pointermove", this.onMove);
    overlay.addEventListener("pointerup", this.onUp);
    this.doc.addEventListener("keydown", this.onKey, true);
  }

  cancel(): void {
    this.clearHighlights();
    if (this.overlay) this.overlay.remove();
    this.overlay = null;
    this.box = null;
    this.origin = null;
    this.doc.removeEventListener("keydown", this.onKey, true);
  }

  private currentRegion(x: number, y: number): Rect {
    const o = this.origin as { x: number; y: number };
    return {
      x: Math.min(o.x, x),
      y: Math.min(o.y, y),
      w: Math.abs(x - o.x),
      h: Math.abs(y - o.y),
    };
  }

  private onDown = (ev: PointerEvent) => {
    this.origin = { x: ev.clientX, y: ev.clientY };
    if (this.box) this.box.style.display = "block";
    this.onMove(ev);
  };

  private onMove = (ev: PointerEvent) => {
    if (!this.origin || !this.box) return;
    const region = this.currentRegion(ev.clientX, ev.clientY);
    Object.assign(this.box.style, {
      left: `${region.x}px`,
      top: `${region.y}px`,
      width: `${region.w}px`,
      height: `${region.h}px`,
    });
    this.highlight(region);
  };

  private onUp = (ev: PointerEvent) => {
    if (!this.origin) return;
    const region = this.currentRegion(ev.clientX, ev.clientY);
    const confirmed = region.w > 0 && region.h > 0;
    this.cancel();
    if (!confirmed) return; // zero-size selection: nothing to move
    this.onConfirm({ region, geometry: collectGeometry(this.doc) });
  };

  private onKey = (ev: KeyboardEvent) => {
    if (ev.key === "Escape") this.cancel();
  };

  private highlight(region: Rect): void {
    this.clearHighlights();
    this.highlighted = elementsInRegion(region, this.doc, this.threshold);
    for (const el of this.highlighted) el.classList.add(HIGHLIGHT_CLASS);
  }

  private clearHighlights(): void {
    for (const el of this.highlighted) el.classList.remove(HIGHLIGHT_CLASS);
    this.highlighted = [];
  }
}

/** Region query in the shape the mapping engine evaluates. */
export function regionQuery(region: Rect): Record<string, unknown> {
  return {
    op: "leaf",
    criterion: { kind: "region", x: region.x, y: region.y, w: region.w, h: region.h },
  };
}
