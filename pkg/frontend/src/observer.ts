// Master-side change observation: batches DOM mutations inside the mirrored
// scope into change records, suppressing echoes of changes we applied
// ourselves. Native element creation, attribute setting, and listener
// registration are wrapped so dynamically created content gets identities
// and role markers the moment the application touches it.

import { ChangeRecord } from "./wire";
import { IDENTITY_ATTR, NodeRegistry, inScope, isElement } from "./registry";

export class MasterObserver {
  private registry: NodeRegistry;
  private doc: Document;
  private observer: MutationObserver;
  private emit: (records: ChangeRecord[]) => void;
  private suppressed = 0;
  private scheduled = false;
  private pending: MutationRecord[] = [];

  constructor(
    registry: NodeRegistry,
    emit: (records: ChangeRecord[]) => void,
    doc: Document = document,
  ) {
    this.registry = registry;
    this.doc = doc;
    this.emit = emit;
    const ObserverCtor = (doc.defaultView?.MutationObserver ??
      MutationObserver) as typeof MutationObserver;
    this.observer = new ObserverCtor((records) => {
      if (this.suppressed > 0) return;
      this.pending.push(...records);
      this.scheduleFlush();
    });
  }

  start(): void {
    this.registry.adoptTree(this.doc);
    this.observer.observe(this.doc.body, {
      childList: true,
      attributes: true,
      characterData: true,
      subtree: true,
      attributeOldValue: true,
    });
  }

  stop(): void {
    this.observer.disconnect();
  }

  /** Run fn without observing it: applied remote changes must not echo. */
  silently(fn: () => void): void {
    this.suppressed += 1;
    try {
      fn();
    } finally {
      this.observer.takeRecords(); // drain anything fn produced
      this.suppressed -= 1;
    }
  }

  private scheduleFlush(): void {
    if (this.scheduled) return;
    this.scheduled = true;
    queueMicrotask(() => {
      this.scheduled = false;
      this.flush();
    });
  }

  /** Translate the pending mutation batch; exposed for deterministic tests. */
  flush(): void {
    const batch = this.pending;
    this.pending = [];
    if (!batch.length) return;
    const records = this.translate(batch);
    if (records.length) this.emit(records);
  }

  private translate(batch: MutationRecord[]): ChangeRecord[] {
    const out: ChangeRecord[] = [];
    const added = new Set<Node>();
    for (const m of batch) {
      if (m.type === "childList") {
        for (const node of Array.from(m.removedNodes)) {
          if (added.has(node)) continue; // add+remove within one batch
          const id = this.registry.idOf(node);
          // only content that was mirrored needs a removal on the slave
          if (id && m.target && inScope(m.target, this.doc)) {
            out.push({ type: "childRemoved", node: id });
          }
        }
        for (const node of Array.from(m.addedNodes)) {
          if (!node.isConnected || !inScope(node, this.doc)) continue;
          added.add(node);
          out.push(this.childAdded(node));
        }
      } else if (m.type === "attributes") {
        const el = m.target as Element;
        const name = m.attributeName ?? "";
        if (!inScope(el, this.doc)) continue;
        if (name.startsWith("on") || name === IDENTITY_ATTR) continue;
        const id = this.registry.mint(el);
        const value = el.getAttribute(name);
        if (value === null) {
          out.push({ type: "attributeRemoved", node: id, attribute: name });
        } else if (value !== m.oldValue) {
          out.push({ type: "attributeChanged", node: id, attribute: name, value });
        }
      } else if (m.type === "characterData") {
        if (!inScope(m.target, this.doc)) continue;
        const id = this.registry.idOf(m.target);
        if (!id) continue; // unenumerated text; resync will pick it up
        out.push({ type: "textChanged", node: id, value: m.target.nodeValue ?? "" });
      }
    }
    return out;
  }

  private childAdded(node: Node): ChangeRecord {
    const parent = node.parentNode as Node;
    const parentId =
      parent === this.doc.body
        ? (this.doc.body.getAttribute(IDENTITY_ATTR) ?? this.registry.mint(this.doc.body))
        : this.registry.mint(parent as Element);
    let prev: string | null = null;
    for (let sib = node.previousSibling; sib; sib = sib.previousSibling) {
      const sid = this.registry.idOf(sib);
      if (sid && inScope(sib, this.doc)) {
        prev = sid;
        break;
      }
    }
    if (isElement(node)) {
      this.registry.mintTree(node);
      const textIds = this.registry.collectTextIds(node);
      return {
        type: "childAdded",
        node: this.registry.mint(node),
        parent: parentId,
        prev_sibling: prev,
        subtree: node.outerHTML,
        text_ids: textIds,
      };
    }
    const id = this.registry.mint(node);
    return {
      type: "childAdded",
      node: id,
      parent: parentId,
      prev_sibling: prev,
      subtree: node.nodeValue ?? "",
      text_ids: [id],
    };
  }

  /** Full rebuild of the mirrored content, answering a resync. */
  snapshotRecords(): ChangeRecord[] {
    const records: ChangeRecord[] = [];
    const body = this.doc.body;
    let prev: string | null = null;
    const roots: Element[] = [];
    // top level: mirrored elements whose parents hold device1-only content
    const scan = (el: Element) => {
      for (const child of Array.from(el.children)) {
        if (child.tagName.toLowerCase() === "script") continue;
        if (inScope(child, this.doc)) roots.push(child);
        else scan(child);
      }
    };
    scan(body);
    for (const root of roots) {
      this.registry.mintTree(root);
      const textIds = this.registry.collectTextIds(root);
      const id = this.registry.mint(root);
      records.push({
        type: "childAdded",
        node: id,
        parent: body.getAttribute(IDENTITY_ATTR) ?? this.registry.mint(body),
        prev_sibling: prev,
        subtree: root.outerHTML,
        text_ids: textIds,
      });
      prev = id;
    }
    return records;
  }
}

/**
 * Wrap native entry points so content the application creates is mapped the
 * moment it exists: fresh elements get identities, listener registration
 * marks elements as interactive for later re-mapping.
 */
export function patchNativeHooks(registry: NodeRegistry, doc: Document = document): void {
  const origCreate = doc.createElement.bind(doc);
  (doc as Document & { createElement: typeof doc.createElement }).createElement = ((
    tag: string,
    options?: ElementCreationOptions,
  ) => {
    const el = origCreate(tag, options);
    if (tag.toLowerCase() !== "script") registry.mint(el);
    return el;
  }) as typeof doc.createElement;

  const origSetAttribute = Element.prototype.setAttribute;
  Element.prototype.setAttribute = function (name: string, value: string) {
    if (
      this.ownerDocument === doc &&
      this.tagName.toLowerCase() !== "script" &&
      !this.getAttribute(IDENTITY_ATTR)
    ) {
      registry.mint(this);
    }
    return origSetAttribute.call(this, name, value);
  };

  const origAddEventListener = Element.prototype.addEventListener;
  Element.prototype.addEventListener = function (
    type: string,
    listener: EventListenerOrEventListenerObject | null,
    options?: boolean | AddEventListenerOptions,
  ) {
    if (this.ownerDocument === doc && isElement(this as Node)) {
      // a listener changes the element's role to interactive; record that
      // for later re-mapping without touching the mirrored attribute set
      this.setAttribute("data-vs-listener", type);
    }
    return origAddEventListener.call(this, type, listener as EventListener, options);
  };
}
