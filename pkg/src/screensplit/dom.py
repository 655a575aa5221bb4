"""HTML document model with stable node identity.

Parses (error-recovering), mutates, and serializes HTML trees. Every node
carries an opaque id unique within a session; elements persist theirs in the
``data-vs-id`` attribute so that two processes holding serialized copies of
the same document can keep addressing the same logical nodes.
"""

from __future__ import annotations

import html
import re
from dataclasses import dataclass, field
from html.parser import HTMLParser

IDENTITY_ATTR = "data-vs-id"

ELEMENT = "element"
TEXT = "text"
COMMENT = "comment"

VOID_ELEMENTS = frozenset({
    "area", "base", "br", "col", "embed", "hr", "img", "input",
    "link", "meta", "param", "source", "track", "wbr",
})

# Contents are character data, never markup.
RAW_TEXT_ELEMENTS = frozenset({"script", "style"})

# Start tags that implicitly close an open <p>.
P_CLOSERS = frozenset({
    "address", "article", "aside", "blockquote", "div", "dl", "fieldset",
    "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5",
    "h6", "header", "hr", "main", "nav", "ol", "p", "pre", "section",
    "table", "ul",
})

# tag -> set of open tags it implicitly closes (nearest, within scan scope).
_AUTO_CLOSE = {
    "li": {"li"},
    "dt": {"dt", "dd"},
    "dd": {"dt", "dd"},
    "tr": {"tr"},
    "td": {"td", "th"},
    "th": {"td", "th"},
    "option": {"option"},
    "optgroup": {"optgroup"},
}

# Elements whose end tag is implied when an auto-close scan walks past them.
_IMPLIED_END = frozenset({"dd", "dt", "li", "option", "optgroup", "p",
                          "rp", "rt", "td", "th"})

_HEAD_TAGS = frozenset({"title", "meta", "link", "style", "script", "base", "noscript"})

CHILD_ADDED = "childAdded"
CHILD_REMOVED = "childRemoved"
ATTRIBUTE_CHANGED = "attributeChanged"
ATTRIBUTE_REMOVED = "attributeRemoved"
TEXT_CHANGED = "textChanged"
REPARENTED = "reparented"


class DomError(Exception):
    """Base for document manipulation errors."""


class UnknownNodeError(DomError):
    def __init__(self, node_id):
        super().__init__(f"unknown node: {node_id!r}")
        self.node_id = node_id


class InvalidPositionError(DomError):
    pass


class CycleError(DomError):
    pass


@dataclass
class MutationRecord:
    """Canonical description of one applied mutation.

    ``fragment``/``fragment_text_ids`` are set for childAdded so the record
    stream alone can rebuild the inserted subtree, text identities included.
    """

    type: str
    node: str
    parent: str | None = None
    prev_sibling: str | None = None
    attribute: str | None = None
    value: str | None = None
    fragment: str | None = None
    fragment_text_ids: list[str] | None = None
    old_parent: str | None = None
    old_prev_sibling: str | None = None


@dataclass
class DomNode:
    id: str
    kind: str
    tag: str = ""
    attrs: dict[str, str] = field(default_factory=dict)
    text: str = ""
    children: list[str] = field(default_factory=list)
    parent: str | None = None


class DomDocument:
    """A mutable HTML tree plus an id allocator that never reuses ids.

    ``nodes`` holds only attached nodes (reachable from the root); nodes
    under construction or removed subtrees live in a detached staging area
    until (re)inserted.
    """

    def __init__(self, base_url: str | None = None, id_prefix: str = "n"):
        self.nodes: dict[str, DomNode] = {}
        self.root: str | None = None
        self.base_url = base_url
        self.id_prefix = id_prefix
        self._detached: dict[str, DomNode] = {}
        self._counter = 0
        self._seen: set[str] = set()

    # -- id allocation ----------------------------------------------------

    def _fresh_id(self) -> str:
        # replica-side documents allocate under a different prefix so their
        # local ids can never clash with ids arriving from the master
        while True:
            self._counter += 1
            token = f"{self.id_prefix}{self._counter}"
            if token not in self._seen:
                self._seen.add(token)
                return token

    def _adopt_id(self, token: str) -> bool:
        """Claim an externally supplied id. Fails if it names a live node."""
        if token in self.nodes or token in self._detached:
            return False
        self._seen.add(token)
        return True

    # -- access -----------------------------------------------------------

    def node(self, node_id: str) -> DomNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNodeError(node_id) from None

    def has_node(self, node_id: str) -> bool:
        return node_id in self.nodes

    def _any_node(self, node_id: str) -> DomNode:
        if node_id in self.nodes:
            return self.nodes[node_id]
        if node_id in self._detached:
            return self._detached[node_id]
        raise UnknownNodeError(node_id)

    def children_of(self, node_id: str) -> list[str]:
        return list(self.node(node_id).children)

    def parent_of(self, node_id: str) -> str | None:
        return self.node(node_id).parent

    def iter_subtree(self, node_id: str):
        """Yield ids depth-first, starting at node_id."""
        node = self._any_node(node_id)
        yield node_id
        for child in list(node.children):
            yield from self.iter_subtree(child)

    def iter_ids(self):
        if self.root is not None:
            yield from self.iter_subtree(self.root)

    def iter_elements(self):
        for nid in self.iter_ids():
            if self.nodes[nid].kind == ELEMENT:
                yield nid

    def find_element(self, tag: str) -> str | None:
        for nid in self.iter_elements():
            if self.nodes[nid].tag == tag:
                return nid
        return None

    @property
    def html_id(self) -> str:
        assert self.root is not None, "empty document"
        return self.root

    @property
    def head_id(self) -> str | None:
        for child in self.node(self.html_id).children:
            node = self.nodes[child]
            if node.kind == ELEMENT and node.tag == "head":
                return child
        return None

    @property
    def body_id(self) -> str | None:
        for child in self.node(self.html_id).children:
            node = self.nodes[child]
            if node.kind == ELEMENT and node.tag == "body":
                return child
        return None

    def text_content(self, node_id: str) -> str:
        node = self._any_node(node_id)
        if node.kind != ELEMENT:
            return node.text
        return "".join(self.text_content(c) for c in node.children)

    def document_position(self) -> dict[str, int]:
        """Document-order index for every attached node."""
        return {nid: i for i, nid in enumerate(self.iter_ids())}

    # -- detached construction --------------------------------------------

    def _register_detached(self, node: DomNode, parent: str | None):
        if parent is not None:
            pnode = self._detached.get(parent)
            if pnode is None:
                raise UnknownNodeError(parent)
            self._guard_child(pnode, node)
            pnode.children.append(node.id)
            node.parent = parent
        self._detached[node.id] = node

    def create_element(self, tag: str, attrs: dict[str, str] | None = None,
                       parent: str | None = None) -> str:
        attrs = {k.lower(): v for k, v in (attrs or {}).items()}
        token = attrs.get(IDENTITY_ATTR, "")
        if token and self._adopt_id(token):
            nid = token
        else:
            nid = self._fresh_id()
            if IDENTITY_ATTR in attrs:
                attrs[IDENTITY_ATTR] = nid
        node = DomNode(id=nid, kind=ELEMENT, tag=tag.lower(), attrs=attrs)
        self._register_detached(node, parent)
        return nid

    def create_text(self, text: str, parent: str | None = None) -> str:
        node = DomNode(id=self._fresh_id(), kind=TEXT, text=text)
        self._register_detached(node, parent)
        return node.id

    def create_comment(self, text: str, parent: str | None = None) -> str:
        node = DomNode(id=self._fresh_id(), kind=COMMENT, text=text)
        self._register_detached(node, parent)
        return node.id

    # -- structural guards --------------------------------------------------

    def _guard_child(self, parent: DomNode, child: DomNode):
        """Reject nestings that would not survive serialize-then-reparse.

        Mirrors the parser's auto-close scan: if reparsing the child's start
        tag in this position would pop an open ancestor, the tree is not a
        serialization fixed point and the insert is refused.
        """
        if parent.kind != ELEMENT:
            raise InvalidPositionError(f"{parent.kind} node cannot have children")
        if parent.tag in VOID_ELEMENTS:
            raise InvalidPositionError(f"<{parent.tag}> cannot have children")
        if parent.tag in RAW_TEXT_ELEMENTS and child.kind == ELEMENT:
            raise InvalidPositionError(f"<{parent.tag}> only holds character data")
        if child.kind != ELEMENT:
            return
        closers = set(_AUTO_CLOSE.get(child.tag, ()))
        if child.tag in P_CLOSERS:
            closers.add("p")
        if not closers:
            return
        anc: DomNode | None = parent
        while anc is not None and anc.kind == ELEMENT:
            if anc.tag in closers:
                raise InvalidPositionError(
                    f"<{child.tag}> would auto-close the open <{anc.tag}>")
            if anc.tag not in _IMPLIED_END:
                return
            anc = self._any_node(anc.parent) if anc.parent else None

    def _insertion_index(self, parent: DomNode, prev_id: str | None) -> int:
        if prev_id is None:
            return 0
        try:
            return parent.children.index(prev_id) + 1
        except ValueError:
            raise InvalidPositionError(
                f"{prev_id!r} is not a child of {parent.id!r}") from None

    # -- mutations ----------------------------------------------------------

    def insert_node(self, node_id: str, parent_id: str,
                    prev_id: str | None = None) -> MutationRecord:
        node = self._detached.get(node_id)
        if node is None:
            if node_id in self.nodes:
                raise InvalidPositionError(f"{node_id!r} is already attached")
            raise UnknownNodeError(node_id)
        if node.parent is not None:
            raise InvalidPositionError(
                f"{node_id!r} is not the root of its detached fragment")
        parent = self.node(parent_id)
        self._guard_child(parent, node)
        index = self._insertion_index(parent, prev_id)
        for nid in list(self.iter_subtree(node_id)):
            self.nodes[nid] = self._detached.pop(nid)
        parent.children.insert(index, node_id)
        node.parent = parent_id
        return MutationRecord(
            type=CHILD_ADDED, node=node_id, parent=parent_id, prev_sibling=prev_id,
            fragment=self.serialize_fragment(node_id),
            fragment_text_ids=self.fragment_text_ids(node_id),
        )

    def remove_node(self, node_id: str) -> MutationRecord:
        if node_id == self.root:
            raise InvalidPositionError("cannot remove root")
        node = self.node(node_id)
        parent = self.nodes[node.parent]
        index = parent.children.index(node_id)
        prev = parent.children[index - 1] if index > 0 else None
        parent.children.remove(node_id)
        old_parent = node.parent
        node.parent = None
        for nid in list(self.iter_subtree(node_id)):
            self._detached[nid] = self.nodes.pop(nid)
        return MutationRecord(type=CHILD_REMOVED, node=node_id,
                              old_parent=old_parent, old_prev_sibling=prev)

    def set_attribute(self, node_id: str, name: str, value: str) -> MutationRecord | None:
        node = self.node(node_id)
        if node.kind != ELEMENT:
            raise InvalidPositionError("attributes only exist on elements")
        name = name.lower()
        if node.attrs.get(name) == value:
            return None
        node.attrs[name] = value
        return MutationRecord(type=ATTRIBUTE_CHANGED, node=node_id,
                              attribute=name, value=value)

    def remove_attribute(self, node_id: str, name: str) -> MutationRecord | None:
        node = self.node(node_id)
        if node.kind != ELEMENT:
            raise InvalidPositionError("attributes only exist on elements")
        name = name.lower()
        if name not in node.attrs:
            return None
        del node.attrs[name]
        return MutationRecord(type=ATTRIBUTE_REMOVED, node=node_id, attribute=name)

    def set_text(self, node_id: str, text: str) -> MutationRecord | None:
        node = self.node(node_id)
        if node.kind == ELEMENT:
            raise InvalidPositionError("set_text targets text or comment nodes")
        if node.text == text:
            return None
        node.text = text
        return MutationRecord(type=TEXT_CHANGED, node=node_id, value=text)

    def move_node(self, node_id: str, parent_id: str,
                  prev_id: str | None = None) -> MutationRecord | None:
        if node_id == self.root:
            raise InvalidPositionError("cannot move root")
        node = self.node(node_id)
        new_parent = self.node(parent_id)
        if parent_id == node_id or parent_id in set(self.iter_subtree(node_id)):
            raise CycleError(f"moving {node_id!r} under {parent_id!r} creates a cycle")
        self._guard_child(new_parent, node)
        if prev_id == node_id:
            raise InvalidPositionError("node cannot follow itself")
        if prev_id is not None and prev_id not in new_parent.children:
            raise InvalidPositionError(f"{prev_id!r} is not a child of {parent_id!r}")
        old_parent_id = node.parent
        old_parent = self.nodes[old_parent_id]
        old_index = old_parent.children.index(node_id)
        old_prev = old_parent.children[old_index - 1] if old_index > 0 else None
        if old_parent_id == parent_id and old_prev == prev_id:
            return None
        old_parent.children.remove(node_id)
        # index computed after removal: same-parent moves shift positions
        index = new_parent.children.index(prev_id) + 1 if prev_id is not None else 0
        new_parent.children.insert(index, node_id)
        node.parent = parent_id
        return MutationRecord(
            type=REPARENTED, node=node_id, parent=parent_id, prev_sibling=prev_id,
            old_parent=old_parent_id, old_prev_sibling=old_prev,
        )

    def purge_detached(self, ids) -> None:
        """Forget stale detached nodes so their ids can be adopted again."""
        for nid in ids:
            self._detached.pop(nid, None)

    # -- copying ------------------------------------------------------------

    def clone(self) -> "DomDocument":
        doc = DomDocument(base_url=self.base_url, id_prefix=self.id_prefix)
        doc.root = self.root
        doc._counter = self._counter
        doc._seen = set(self._seen)
        for nid, node in self.nodes.items():
            doc.nodes[nid] = DomNode(id=node.id, kind=node.kind, tag=node.tag,
                                     attrs=dict(node.attrs), text=node.text,
                                     children=list(node.children), parent=node.parent)
        return doc

    # -- serialization -------------------------------------------------------

    def serialize_fragment(self, node_id: str, include_identity: bool = True) -> str:
        out: list[str] = []
        _serialize(self, self._any_node(node_id), out, include_identity)
        return "".join(out)

    def fragment_text_ids(self, node_id: str) -> list[str]:
        """Ids of text/comment nodes in DFS order, as a fragment parser will
        see them: an adjacent run of text siblings collapses into one entry
        (markup cannot keep the boundary)."""
        ids: list[str] = []

        def walk(nid: str):
            node = self._any_node(nid)
            if node.kind != ELEMENT:
                ids.append(nid)
                return
            last_was_text = False
            for child in node.children:
                kind = self._any_node(child).kind
                if kind == TEXT and last_was_text:
                    continue
                walk(child)
                last_was_text = kind == TEXT

        walk(node_id)
        return ids


def serialize_html(doc: DomDocument, include_identity: bool = False) -> str:
    if doc.root is None:
        return "<!DOCTYPE html>\n"
    return "<!DOCTYPE html>\n" + doc.serialize_fragment(doc.root, include_identity)


def _serialize(doc: DomDocument, node: DomNode, out: list[str], include_identity: bool):
    if node.kind == TEXT:
        parent = doc._any_node(node.parent) if node.parent else None
        if parent is not None and parent.tag in RAW_TEXT_ELEMENTS:
            out.append(node.text)
        else:
            out.append(html.escape(node.text, quote=False))
        return
    if node.kind == COMMENT:
        out.append(f"<!--{node.text}-->")
        return
    out.append(f"<{node.tag}")
    attrs = node.attrs
    if include_identity and IDENTITY_ATTR not in attrs:
        attrs = dict(attrs)
        attrs[IDENTITY_ATTR] = node.id
    for name, value in attrs.items():
        out.append(f' {name}="{html.escape(value, quote=True)}"')
    out.append(">")
    if node.tag in VOID_ELEMENTS:
        return
    for child in node.children:
        _serialize(doc, doc._any_node(child), out, include_identity)
    out.append(f"</{node.tag}>")


class _TreeBuilder(HTMLParser):
    """Error-recovering tree construction over the stdlib tokenizer.

    Covers the recovery cases this engine relies on: implied html/head/body,
    auto-closing tags, void elements, rawtext script/style, decoded charrefs.
    """

    def __init__(self, doc: DomDocument, fragment_root: str | None = None):
        super().__init__(convert_charrefs=True)
        self.doc = doc
        self.fragment_root = fragment_root
        self.stack: list[str] = []  # open element ids
        if fragment_root is not None:
            self.stack.append(fragment_root)
        self.html_id: str | None = None
        self.head_id: str | None = None
        self.body_id: str | None = None

    # fragment mode skips all document scaffolding
    @property
    def _document_mode(self) -> bool:
        return self.fragment_root is None

    def _make_element(self, tag: str, attr_pairs) -> str:
        attrs: dict[str, str] = {}
        for name, value in attr_pairs:
            name = name.lower()
            if name not in attrs:
                attrs[name] = value if value is not None else ""
        return self.doc.create_element(tag, attrs)

    def _append(self, child_id: str):
        parent_id = self.stack[-1]
        parent = self.doc._any_node(parent_id)
        child = self.doc._any_node(child_id)
        parent.children.append(child_id)
        child.parent = parent_id

    def _open(self, tag: str, attr_pairs):
        nid = self._make_element(tag, attr_pairs)
        self._append(nid)
        if tag not in VOID_ELEMENTS:
            self.stack.append(nid)
        return nid

    def _ensure_html(self, attr_pairs=()):
        if self.html_id is None:
            self.html_id = self._make_element("html", attr_pairs)
            self.doc.root = self.html_id
            self.stack.append(self.html_id)

    def _ensure_head(self, attr_pairs=()):
        self._ensure_html()
        if self.head_id is None:
            self.head_id = self._make_element("head", attr_pairs)
            parent = self.doc._any_node(self.html_id)
            parent.children.append(self.head_id)
            self.doc._any_node(self.head_id).parent = self.html_id

    def _ensure_body(self, attr_pairs=()):
        self._ensure_head()
        if self.body_id is None:
            self.body_id = self._make_element("body", attr_pairs)
            parent = self.doc._any_node(self.html_id)
            parent.children.append(self.body_id)
            self.doc._any_node(self.body_id).parent = self.html_id
        self.stack = [self.html_id, self.body_id]

    def _auto_close(self, tag: str):
        closers = set(_AUTO_CLOSE.get(tag, ()))
        if tag in P_CLOSERS:
            closers.add("p")
        if not closers:
            return
        for i in range(len(self.stack) - 1, -1, -1):
            node = self.doc._any_node(self.stack[i])
            if node.kind != ELEMENT:
                return
            if node.tag in closers:
                del self.stack[i:]
                return
            if node.tag not in _IMPLIED_END:
                return

    def handle_starttag(self, tag, attr_pairs):
        tag = tag.lower()
        if self._document_mode:
            if tag == "html":
                if self.html_id is None:
                    self._ensure_html(attr_pairs)
                return
            if tag == "head":
                if self.head_id is None:
                    self._ensure_head(attr_pairs)
                if self.head_id not in self.stack:
                    self.stack.append(self.head_id)
                return
            if tag == "body":
                self._ensure_body(attr_pairs if self.body_id is None else ())
                return
            if self.body_id is None:
                if tag in _HEAD_TAGS:
                    self._ensure_head()
                    if self.head_id not in self.stack:
                        self.stack.append(self.head_id)
                else:
                    self._ensure_body()
        self._auto_close(tag)
        self._open(tag, attr_pairs)

    def handle_startendtag(self, tag, attr_pairs):
        # treated as an immediately-closed element; exact for voids, a
        # harmless structural fixed point for the rest
        self.handle_starttag(tag, attr_pairs)
        if tag.lower() not in VOID_ELEMENTS:
            self.handle_endtag(tag)

    def handle_endtag(self, tag):
        tag = tag.lower()
        if self._document_mode:
            if tag == "head":
                if self.html_id is not None:
                    self.stack = [self.html_id]
                return
            if tag in ("body", "html"):
                # close any elements left open inside body
                if self.body_id is not None:
                    self.stack = [self.html_id, self.body_id]
                return
        floor = 1 if self.fragment_root is not None else 0
        for i in range(len(self.stack) - 1, floor - 1, -1):
            node = self.doc._any_node(self.stack[i])
            if node.kind == ELEMENT and node.tag == tag:
                if self._document_mode and self.stack[i] in (
                        self.html_id, self.body_id, self.head_id):
                    return
                del self.stack[i:]
                return
        # no matching open tag: ignore

    def handle_data(self, data):
        if not data:
            return
        if self._document_mode:
            top = self.stack[-1] if self.stack else None
            if top is None or top == self.html_id:
                if not data.strip():
                    return
                self._ensure_body()
            elif top == self.head_id:
                # whitespace is legal head content; anything else opens body
                if data.strip():
                    self._ensure_body()
        nid = self.doc.create_text(data)
        self._append(nid)

    def handle_comment(self, data):
        if self._document_mode and not self.stack:
            self._ensure_html()
        nid = self.doc.create_comment(data)
        self._append(nid)

    def handle_decl(self, decl):
        pass  # doctype dropped; serializer always re-emits <!DOCTYPE html>

    def finish(self):
        if self._document_mode:
            self._ensure_body()


def parse_html(data: bytes | str, base_url: str | None = None,
               id_prefix: str = "n") -> DomDocument:
    """Parse UTF-8 HTML into a document, adopting persisted identities.

    Malformed markup is recovered in the usual HTML manner; an empty input
    yields the bare html/head/body scaffold.
    """
    if isinstance(data, bytes):
        text = data.decode("utf-8")
    else:
        text = data
    doc = DomDocument(base_url=base_url, id_prefix=id_prefix)
    # reserve persisted ids up front: fresh allocation for identity-less
    # nodes must not claim a token a later element needs to adopt
    doc._seen.update(_VS_ID_RE.findall(text))
    builder = _TreeBuilder(doc)
    builder.feed(text)
    builder.close()
    builder.finish()
    # scaffolding appended nodes directly into the detached store
    for nid in list(doc.iter_subtree(doc.root)):
        doc.nodes[nid] = doc._detached.pop(nid)
    return doc


_VS_ID_RE = re.compile(r'data-vs-id\s*=\s*"([^"]*)"')


def fragment_element_ids(markup: str) -> set[str]:
    """Persisted element ids mentioned in a serialized fragment."""
    return set(_VS_ID_RE.findall(markup))


def parse_fragment(doc: DomDocument, markup: str,
                   text_ids: list[str] | None = None) -> list[str]:
    """Parse markup into detached nodes of ``doc``; returns the root ids.

    Element identities are adopted from ``data-vs-id``; text/comment nodes
    take ids from ``text_ids`` positionally (DFS order) when given.
    """
    # reserve incoming ids so fresh allocation cannot collide with them
    doc._seen.update(_VS_ID_RE.findall(markup))
    if text_ids:
        doc._seen.update(text_ids)
    container = doc.create_element("template-root")
    builder = _TreeBuilder(doc, fragment_root=container)
    builder.feed(markup)
    builder.close()
    roots = list(doc._any_node(container).children)
    for rid in roots:
        doc._any_node(rid).parent = None
    del doc._detached[container]
    if text_ids is not None:
        flat: list[str] = []
        for rid in roots:
            for nid in doc.iter_subtree(rid):
                if doc._any_node(nid).kind != ELEMENT:
                    flat.append(nid)
        if len(flat) != len(text_ids):
            raise DomError(
                f"fragment has {len(flat)} text nodes but {len(text_ids)} ids given")
        for old, new in zip(flat, text_ids):
            if old == new:
                continue
            if not doc._adopt_id(new):
                raise DomError(f"text id {new!r} already in use")
            node = doc._detached.pop(old)
            node.id = new
            doc._detached[new] = node
            if node.parent is not None:
                siblings = doc._any_node(node.parent).children
                siblings[siblings.index(old)] = new
            for child in node.children:
                doc._any_node(child).parent = new
            roots[:] = [new if r == old else r for r in roots]
    return roots


def apply_record(doc: DomDocument, record: MutationRecord):
    """Replay one MutationRecord (as produced by the mutation methods)."""
    if record.type == CHILD_ADDED:
        if doc.has_node(record.node):
            raise InvalidPositionError(f"{record.node!r} already attached")
        if record.node not in doc._detached:
            roots = parse_fragment(doc, record.fragment or "",
                                   record.fragment_text_ids)
            if len(roots) != 1 or roots[0] != record.node:
                raise DomError("childAdded fragment does not rebuild the recorded node")
        doc.insert_node(record.node, record.parent, record.prev_sibling)
    elif record.type == CHILD_REMOVED:
        doc.remove_node(record.node)
    elif record.type == ATTRIBUTE_CHANGED:
        doc.set_attribute(record.node, record.attribute, record.value or "")
    elif record.type == ATTRIBUTE_REMOVED:
        doc.remove_attribute(record.node, record.attribute)
    elif record.type == TEXT_CHANGED:
        doc.set_text(record.node, record.value or "")
    elif record.type == REPARENTED:
        doc.move_node(record.node, record.parent, record.prev_sibling)
    else:
        raise DomError(f"unknown record type {record.type!r}")


def validate_document(doc: DomDocument) -> list[str]:
    """Check the tree invariants; returns human-readable violations."""
    problems: list[str] = []
    if doc.root is None:
        return ["document has no root"]
    if doc.root not in doc.nodes:
        return [f"root {doc.root!r} missing from node map"]
    seen: set[str] = set()
    stack = [doc.root]
    while stack:
        nid = stack.pop()
        if nid in seen:
            problems.append(f"{nid!r} reachable twice (cycle or shared child)")
            continue
        seen.add(nid)
        node = doc.nodes.get(nid)
        if node is None:
            problems.append(f"child {nid!r} missing from node map")
            continue
        for child_id in node.children:
            child = doc.nodes.get(child_id)
            if child is None:
                problems.append(f"child {child_id!r} of {nid!r} missing from node map")
                continue
            if child.parent != nid:
                problems.append(
                    f"{child_id!r} has parent {child.parent!r}, expected {nid!r}")
            stack.append(child_id)
        if node.kind == ELEMENT:
            for name in node.attrs:
                if name != name.lower():
                    problems.append(f"attribute {name!r} on {nid!r} not lowercase")
    if doc.nodes[doc.root].parent is not None:
        problems.append("root has a parent")
    unreachable = set(doc.nodes) - seen
    for nid in sorted(unreachable):
        problems.append(f"{nid!r} is attached but unreachable from root")
    return problems


def nodes_equal(a: DomDocument, aid: str, b: DomDocument, bid: str,
                compare_identity: bool = True) -> bool:
    """Structural equality of two subtrees.

    Attribute order is ignored, as is the persisted identity attribute
    (identity is compared through node ids when requested).
    """
    na, nb = a._any_node(aid), b._any_node(bid)
    if na.kind != nb.kind:
        return False
    if na.kind != ELEMENT:
        # text/comment identity is session-local, never persisted in markup
        return na.text == nb.text
    if na.tag != nb.tag:
        return False
    if compare_identity and na.id != nb.id:
        return False
    attrs_a = {k: v for k, v in na.attrs.items() if k != IDENTITY_ATTR}
    attrs_b = {k: v for k, v in nb.attrs.items() if k != IDENTITY_ATTR}
    if attrs_a != attrs_b:
        return False
    if len(na.children) != len(nb.children):
        return False
    return all(nodes_equal(a, ca, b, cb, compare_identity)
               for ca, cb in zip(na.children, nb.children))


def documents_equal(a: DomDocument, b: DomDocument,
                    compare_identity: bool = True) -> bool:
    if a.root is None or b.root is None:
        return a.root is None and b.root is None
    return nodes_equal(a, a.root, b, b.root, compare_identity)
