// Node identity bookkeeping: data-vs-id <-> live DOM node.
//
// Elements carry their id as an attribute and register on sight. Text and
// comment nodes have no markup representation, so their ids only exist in
// this map, assigned positionally from the text_ids that ride along with
// serialized fragments (adjacent text runs collapse to one entry, matching
// how a parser will see the markup).

export const IDENTITY_ATTR = "data-vs-id";

/** Realm-safe element check: instanceof fails across jsdom windows. */
export function isElement(node: Node): node is Element {
  return node.nodeType === 1;
}
export const DEVICE_ATTR = "data-device";

export class NodeRegistry {
  private byId = new Map<string, Node>();
  private ids = new WeakMap<Node, string>();
  private minted = 0;
  readonly prefix: string;

  constructor(prefix = "m") {
    this.prefix = prefix;
  }

  register(id: string, node: Node): void {
    this.byId.set(id, node);
    this.ids.set(node, id);
    if (isElement(node) && node.getAttribute(IDENTITY_ATTR) !== id) {
      node.setAttribute(IDENTITY_ATTR, id);
    }
  }

  get(id: string): Node | undefined {
    return this.byId.get(id);
  }

  idOf(node: Node): string | undefined {
    const known = this.ids.get(node);
    if (known) return known;
    if (isElement(node)) {
      const attr = node.getAttribute(IDENTITY_ATTR);
      if (attr) {
        this.register(attr, node);
        return attr;
      }
    }
    return undefined;
  }

  mint(node: Node): string {
    const existing = this.idOf(node);
    if (existing) return existing;
    this.minted += 1;
    const id = `${this.prefix}${this.minted}`;
    this.register(id, node);
    return id;
  }

  forget(node: Node): void {
    const id = this.ids.get(node);
    if (id) this.byId.delete(id);
  }

  /** Adopt every element below root that carries a persisted identity. */
  adoptTree(root: ParentNode): void {
    if (isElement(root)) this.idOf(root);
    root.querySelectorAll(`[${IDENTITY_ATTR}]`).forEach((el) => this.idOf(el));
  }

  /**
   * Walk a fragment depth-first and register its text/comment nodes against
   * the given ids; one id per adjacent text run, the way serialization sees
   * them. Returns the number of ids consumed.
   */
  assignTextIds(root: Node, textIds: string[], from = 0): number {
    let cursor = from;
    const walk = (node: Node) => {
      if (node.nodeType === 1) {
        let lastWasText = false;
        for (const child of Array.from(node.childNodes)) {
          const isText = child.nodeType === 3;
          if (isText && lastWasText) continue;
          walk(child);
          lastWasText = isText;
        }
        return;
      }
      if (
        node.nodeType === 3 ||
        node.nodeType === 8
      ) {
        if (cursor < textIds.length) {
          this.register(textIds[cursor], node);
          cursor += 1;
        }
      }
    };
    walk(root);
    return cursor - from;
  }

  /**
   * Enumerate text/comment ids of a subtree in the same DFS order, minting
   * ids for unknown nodes; the counterpart of assignTextIds on the sending
   * side.
   */
  collectTextIds(root: Node): string[] {
    const out: string[] = [];
    const walk = (node: Node) => {
      if (node.nodeType === 1) {
        let lastWasText = false;
        for (const child of Array.from(node.childNodes)) {
          const isText = child.nodeType === 3;
          if (isText && lastWasText) continue;
          walk(child);
          lastWasText = isText;
        }
        return;
      }
      if (
        node.nodeType === 3 ||
        node.nodeType === 8
      ) {
        out.push(this.mint(node));
      }
    };
    walk(root);
    return out;
  }

  /** Mint ids for every element in a new subtree (root included). */
  mintTree(root: Element): void {
    this.mint(root);
    root.querySelectorAll("*").forEach((el) => {
      if (el.tagName.toLowerCase() !== "script") this.mint(el);
    });
  }
}

export type Assignment = "device1" | "device2" | "dev1&dev2";

/** Nearest self-or-ancestor device annotation; how dynamic content inherits. */
export function effectiveAssignment(node: Node): Assignment | null {
  let cur: Node | null = node;
  while (cur) {
    if (isElement(cur)) {
      const token = cur.getAttribute(DEVICE_ATTR);
      if (token === "device1" || token === "device2" || token === "dev1&dev2") {
        return token;
      }
    }
    cur = cur.parentNode;
  }
  return null;
}

/** Mirrored to the secondary device: effectively device2/both, inside body. */
export function inScope(node: Node, doc: Document = document): boolean {
  if (!doc.body || !doc.body.contains(node)) return false;
  const assignment = effectiveAssignment(node);
  return assignment === "device2" || assignment === "dev1&dev2";
}
