// Apply incoming change records to the local document. Used by the slave
// for all mirrored content, and by the master for annotation updates after
// a runtime re-split.

import { ChangeRecord } from "./wire";
import { NodeRegistry, isElement } from "./registry";

export class DesyncError extends Error {}

export class Applier {
  private registry: NodeRegistry;
  private doc: Document;
  private bodyAliases = new Set<string>();
  private snapshotMode = false;

  constructor(registry: NodeRegistry, doc: Document = document) {
    this.registry = registry;
    this.doc = doc;
  }

  private resolve(id: string): Node {
    const node = this.registry.get(id);
    if (node) return node;
    throw new DesyncError(`unknown node ${id}`);
  }

  /**
   * Parent ids can reference the master's body element, which this page
   * renders as its own <body> under a different identity. Snapshot records
   * are all top level, so an unknown parent there is the body by
   * construction; once adopted, the alias is remembered for normal batches.
   */
  private resolveParent(id: string | null | undefined): Node {
    if (id == null) throw new DesyncError("record without parent");
    if (this.bodyAliases.has(id)) return this.doc.body;
    const known = this.registry.get(id);
    if (known) return known;
    const bodyId = this.doc.body.getAttribute("data-vs-id");
    if (bodyId === null || bodyId === id || this.snapshotMode) {
      this.bodyAliases.add(id);
      return this.doc.body;
    }
    throw new DesyncError(`unknown parent ${id}`);
  }

  clearBody(): void {
    const body = this.doc.body;
    while (body.firstChild) body.removeChild(body.firstChild);
    for (const attr of Array.from(body.attributes)) {
      if (attr.name !== "data-vs-id") body.removeAttribute(attr.name);
    }
  }

  apply(records: ChangeRecord[]): void {
    for (const record of records) this.applyOne(record);
  }

  /** Clear the body and rebuild it from a full snapshot batch. */
  applySnapshot(records: ChangeRecord[]): void {
    this.clearBody();
    this.snapshotMode = true;
    try {
      this.apply(records);
    } finally {
      this.snapshotMode = false;
    }
  }

  applyOne(record: ChangeRecord): void {
    switch (record.type) {
      case "childAdded":
        return this.childAdded(record);
      case "childRemoved": {
        const node = this.resolve(record.node);
        if (!node.parentNode) throw new DesyncError(`${record.node} not attached`);
        node.parentNode.removeChild(node);
        return;
      }
      case "attributeChanged": {
        const el = this.resolve(record.node);
        if (!(isElement(el))) throw new DesyncError("attr on non-element");
        el.setAttribute(record.attribute ?? "", record.value ?? "");
        return;
      }
      case "attributeRemoved": {
        const el = this.resolve(record.node);
        if (!(isElement(el))) throw new DesyncError("attr on non-element");
        el.removeAttribute(record.attribute ?? "");
        return;
      }
      case "textChanged": {
        const node = this.resolve(record.node);
        node.nodeValue = record.value ?? "";
        return;
      }
      case "reparented": {
        const node = this.resolve(record.node);
        const parent = this.resolveParent(record.parent);
        const before = this.insertionPoint(parent, record.prev_sibling);
        parent.insertBefore(node, before);
        return;
      }
      default:
        throw new DesyncError(`unknown change type ${(record as ChangeRecord).type}`);
    }
  }

  private insertionPoint(parent: Node, prev: string | null | undefined): Node | null {
    if (prev == null) return parent.firstChild;
    const prevNode = this.resolve(prev);
    if (prevNode.parentNode !== parent) {
      throw new DesyncError(`${prev} is not a child of the record's parent`);
    }
    return prevNode.nextSibling;
  }

  private childAdded(record: ChangeRecord): void {
    if (this.registry.get(record.node)?.isConnected) {
      throw new DesyncError(`childAdded ${record.node}: already present`);
    }
    const parent = this.resolveParent(record.parent);
    const template = this.doc.createElement("template");
    template.innerHTML = record.subtree ?? "";
    const content = template.content;
    if (content.childNodes.length !== 1) {
      throw new DesyncError(`childAdded ${record.node}: fragment has ${content.childNodes.length} roots`);
    }
    const root = content.firstChild as Node;
    this.registry.assignTextIds(root, record.text_ids ?? []);
    if (isElement(root)) this.registry.adoptTree(root);
    const rootId = isElement(root)
      ? root.getAttribute("data-vs-id")
      : (record.text_ids ?? [])[0];
    if (rootId !== record.node) {
      throw new DesyncError(`childAdded ${record.node}: fragment rebuilds ${rootId}`);
    }
    const before = this.insertionPoint(parent, record.prev_sibling);
    parent.insertBefore(root, before);
  }
}
