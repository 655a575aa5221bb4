"""Wire messages of the mirroring phase, and the change streams themselves.

Messages are JSON lines. Each change batch is the minimal reconciliation
between two consecutive projections of the master document: removals first,
then adds/moves in document order, then attribute and text updates. Applying
a batch to a replica that matched the earlier projection makes it match the
later one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import dom
from .dom import DomDocument
from .projection import Projection, build_projection, serialize_subtree

HELLO = "hello"
BYE = "bye"
CHANGES = "changes"
INTERACTION = "interaction"
GEOMETRY = "geometry"
SPLIT_REQUEST = "split_request"
RESYNC = "resync"

KINDS = frozenset({HELLO, BYE, CHANGES, INTERACTION, GEOMETRY,
                   SPLIT_REQUEST, RESYNC})

EVENT_TYPES = frozenset({"click", "input", "change", "submit", "keydown"})


class ProtocolError(Exception):
    pass


class MalformedMessageError(ProtocolError):
    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class UnknownKindError(ProtocolError):
    def __init__(self, kind):
        super().__init__(f"unknown message kind: {kind!r}")
        self.kind = kind


class MissingFieldError(ProtocolError):
    def __init__(self, what: str):
        super().__init__(f"missing or invalid field: {what}")


class DesyncError(ProtocolError):
    """The replica no longer matches the master; a resync is required."""


@dataclass
class SyncMessage:
    session: str
    seq: int
    kind: str
    payload: dict = field(default_factory=dict)


@dataclass
class ChangeRecord:
    type: str
    node: str
    parent: str | None = None
    prev_sibling: str | None = None
    attribute: str | None = None
    value: str | None = None
    subtree: str | None = None
    text_ids: list[str] = field(default_factory=list)

    def to_wire(self) -> dict:
        out: dict = {"type": self.type, "node": self.node}
        if self.type == dom.CHILD_ADDED:
            out["parent"] = self.parent
            out["prev_sibling"] = self.prev_sibling
            out["subtree"] = self.subtree
            out["text_ids"] = self.text_ids
        elif self.type == dom.REPARENTED:
            out["parent"] = self.parent
            out["prev_sibling"] = self.prev_sibling
        elif self.type == dom.ATTRIBUTE_CHANGED:
            out["attribute"] = self.attribute
            out["value"] = self.value
        elif self.type == dom.ATTRIBUTE_REMOVED:
            out["attribute"] = self.attribute
        elif self.type == dom.TEXT_CHANGED:
            out["value"] = self.value
        return out

    @classmethod
    def from_wire(cls, data: dict) -> "ChangeRecord":
        if not isinstance(data, dict):
            raise MissingFieldError("change record must be an object")
        rtype = data.get("type")
        node = data.get("node")
        if rtype not in (dom.CHILD_ADDED, dom.CHILD_REMOVED, dom.ATTRIBUTE_CHANGED,
                         dom.ATTRIBUTE_REMOVED, dom.TEXT_CHANGED, dom.REPARENTED):
            raise MissingFieldError(f"change record type {rtype!r}")
        if not isinstance(node, str) or not node:
            raise MissingFieldError("change record node")
        rec = cls(type=rtype, node=node)
        if rtype in (dom.CHILD_ADDED, dom.REPARENTED):
            if not isinstance(data.get("parent"), str):
                raise MissingFieldError(f"{rtype} parent")
            rec.parent = data["parent"]
            rec.prev_sibling = data.get("prev_sibling")
            if rec.prev_sibling is not None and not isinstance(rec.prev_sibling, str):
                raise MissingFieldError(f"{rtype} prev_sibling")
        if rtype == dom.CHILD_ADDED:
            if not isinstance(data.get("subtree"), str):
                raise MissingFieldError("childAdded subtree")
            rec.subtree = data["subtree"]
            text_ids = data.get("text_ids", [])
            if not isinstance(text_ids, list):
                raise MissingFieldError("childAdded text_ids")
            rec.text_ids = text_ids
        if rtype in (dom.ATTRIBUTE_CHANGED, dom.ATTRIBUTE_REMOVED):
            if not isinstance(data.get("attribute"), str):
                raise MissingFieldError(f"{rtype} attribute")
            rec.attribute = data["attribute"]
        if rtype in (dom.ATTRIBUTE_CHANGED, dom.TEXT_CHANGED):
            if "value" not in data or not isinstance(data["value"], str):
                raise MissingFieldError(f"{rtype} value")
            rec.value = data["value"]
        return rec


@dataclass
class InteractionRecord:
    node: str
    event_type: str
    detail: dict = field(default_factory=dict)

    def to_wire(self) -> dict:
        return {"node": self.node, "event_type": self.event_type,
                "detail": self.detail}

    @classmethod
    def from_wire(cls, data: dict) -> "InteractionRecord":
        node = data.get("node")
        event_type = data.get("event_type")
        if not isinstance(node, str) or not node:
            raise MissingFieldError("interaction node")
        if event_type not in EVENT_TYPES:
            raise MissingFieldError(f"interaction event_type {event_type!r}")
        detail = data.get("detail", {})
        if not isinstance(detail, dict):
            raise MissingFieldError("interaction detail")
        return cls(node=node, event_type=event_type, detail=detail)


def changes_message(session: str, seq: int, records: list[ChangeRecord],
                    snapshot: bool = False) -> SyncMessage:
    payload: dict = {"records": [r.to_wire() for r in records]}
    if snapshot:
        payload["snapshot"] = True
    return SyncMessage(session=session, seq=seq, kind=CHANGES, payload=payload)


def records_of(msg: SyncMessage) -> list[ChangeRecord]:
    return [ChangeRecord.from_wire(r) for r in msg.payload.get("records", [])]


def encode(msg: SyncMessage) -> bytes:
    """One JSON line, UTF-8."""
    data = {"session": msg.session, "seq": msg.seq, "kind": msg.kind,
            "payload": msg.payload}
    return json.dumps(data, separators=(",", ":"), ensure_ascii=False).encode("utf-8") + b"\n"


def decode(data: bytes | str) -> SyncMessage:
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedMessageError("not valid UTF-8", exc.start) from exc
    else:
        text = data
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedMessageError(f"bad JSON: {exc.msg}", exc.pos) from exc
    if not isinstance(raw, dict):
        raise MalformedMessageError("message must be a JSON object")
    kind = raw.get("kind")
    if kind not in KINDS:
        raise UnknownKindError(kind)
    session = raw.get("session")
    if not isinstance(session, str) or not session:
        raise MissingFieldError("session")
    seq = raw.get("seq")
    if not isinstance(seq, int):
        raise MissingFieldError("seq")
    payload = raw.get("payload", {})
    if not isinstance(payload, dict):
        raise MissingFieldError("payload")
    msg = SyncMessage(session=session, seq=seq, kind=kind, payload=payload)
    if kind == CHANGES:
        records_of(msg)  # validates every record
    elif kind == INTERACTION:
        InteractionRecord.from_wire(payload)
    elif kind == HELLO:
        if payload.get("role") not in ("master", "slave"):
            raise MissingFieldError("hello role")
    return msg


# -- change stream production -------------------------------------------------


def reconcile_projections(pre: Projection, post: Projection) -> list[ChangeRecord]:
    """Minimal change records turning the earlier projection into the later.

    Tracks a simulated replica so every emitted record's preconditions hold
    at its point in the stream: content that leaves gets childRemoved,
    content that (re)appears gets childAdded with its full current subtree,
    surviving nodes get reparented/attribute/text records as needed.
    """
    assert pre.body_id == post.body_id, "projections of different documents"
    body = pre.body_id
    records: list[ChangeRecord] = []
    updates: list[ChangeRecord] = []

    sim_children: dict[str, list[str]] = {body: list(pre.top_level)}
    sim_parent: dict[str, str] = {}
    attached: set[str] = set(pre.nodes)
    for pid, node in pre.nodes.items():
        sim_children[pid] = list(node.children)
        for child in node.children:
            sim_parent[child] = pid
    for child in pre.top_level:
        sim_parent[child] = body

    def detach(nid: str):
        attached.discard(nid)
        for child in sim_children.get(nid, ()):
            detach(child)

    def remove(nid: str):
        records.append(ChangeRecord(type=dom.CHILD_REMOVED, node=nid))
        sim_children[sim_parent[nid]].remove(nid)
        detach(nid)

    def scan_removed(nid: str):
        for child in list(sim_children.get(nid, ())):
            if child not in post.nodes:
                remove(child)
            else:
                scan_removed(child)

    scan_removed(body)

    def diff_node(nid: str):
        pre_node, post_node = pre.nodes[nid], post.nodes[nid]
        if pre_node.kind != dom.ELEMENT:
            if pre_node.text != post_node.text:
                updates.append(ChangeRecord(type=dom.TEXT_CHANGED, node=nid,
                                            value=post_node.text))
            return
        for name, value in post_node.attrs.items():
            if pre_node.attrs.get(name) != value:
                updates.append(ChangeRecord(type=dom.ATTRIBUTE_CHANGED, node=nid,
                                            attribute=name, value=value))
        for name in pre_node.attrs:
            if name not in post_node.attrs:
                updates.append(ChangeRecord(type=dom.ATTRIBUTE_REMOVED, node=nid,
                                            attribute=name))

    def register_added_subtree(nid: str, parent: str):
        attached.add(nid)
        sim_parent[nid] = parent
        sim_children[nid] = list(post.nodes[nid].children)
        for child in sim_children[nid]:
            register_added_subtree(child, nid)

    def reconcile_children(pid: str):
        sim = sim_children.setdefault(pid, [])
        ptr = 0
        last: str | None = None
        for k in post.children_of(pid):
            if k in attached:
                if ptr < len(sim) and sim[ptr] == k:
                    ptr += 1
                else:
                    records.append(ChangeRecord(type=dom.REPARENTED, node=k,
                                                parent=pid, prev_sibling=last))
                    sim_children[sim_parent[k]].remove(k)
                    sim.insert(ptr, k)
                    sim_parent[k] = pid
                    ptr += 1
                if k in pre.nodes:
                    diff_node(k)
                if post.nodes[k].kind == dom.ELEMENT:
                    reconcile_children(k)
            else:
                # surviving content nested inside the new subtree leaves its
                # old place first; the fragment carries its current state
                for sid in post.subtree_ids(k):
                    if sid in attached:
                        remove(sid)
                fragment, text_ids = serialize_subtree(post, k)
                records.append(ChangeRecord(
                    type=dom.CHILD_ADDED, node=k, parent=pid, prev_sibling=last,
                    subtree=fragment, text_ids=text_ids))
                sim.insert(ptr, k)
                ptr += 1
                register_added_subtree(k, pid)
            last = k

    reconcile_children(body)

    for name, value in post.body_attrs.items():
        if pre.body_attrs.get(name) != value:
            updates.append(ChangeRecord(type=dom.ATTRIBUTE_CHANGED, node=body,
                                        attribute=name, value=value))
    for name in pre.body_attrs:
        if name not in post.body_attrs:
            updates.append(ChangeRecord(type=dom.ATTRIBUTE_REMOVED, node=body,
                                        attribute=name))
    return records + updates


def diff_to_changes(doc_before: DomDocument,
                    records: list[dom.MutationRecord]) -> list[ChangeRecord]:
    """Change records for a mutation micro-batch applied to the master.

    The batch is replayed on a copy and the two projections reconciled, so
    scope crossings (moves in or out of mirrored content) surface as
    adds/removes and device1-only churn emits nothing.
    """
    pre = build_projection(doc_before)
    after = doc_before.clone()
    for rec in records:
        dom.apply_record(after, rec)
    return reconcile_projections(pre, build_projection(after))


class ChangeCollector:
    """Tracks a live master document batch by batch.

    Mutate the document freely, then ``flush()`` the accumulated effect as
    one Changes batch (summary semantics: intermediate states collapse).
    """

    def __init__(self, doc: DomDocument):
        self.doc = doc
        self._snapshot = build_projection(doc)

    def flush(self) -> list[ChangeRecord]:
        post = build_projection(self.doc)
        records = reconcile_projections(self._snapshot, post)
        self._snapshot = post
        return records

    def snapshot_records(self) -> list[ChangeRecord]:
        """Full rebuild of the mirrored content, for desync recovery; the
        receiver clears its body before applying."""
        self._snapshot = build_projection(self.doc)
        records: list[ChangeRecord] = []
        last = None
        for top in self._snapshot.top_level:
            fragment, text_ids = serialize_subtree(self._snapshot, top)
            records.append(ChangeRecord(type=dom.CHILD_ADDED, node=top,
                                        parent=self._snapshot.body_id,
                                        prev_sibling=last,
                                        subtree=fragment, text_ids=text_ids))
            last = top
        for name, value in self._snapshot.body_attrs.items():
            records.append(ChangeRecord(type=dom.ATTRIBUTE_CHANGED,
                                        node=self._snapshot.body_id,
                                        attribute=name, value=value))
        return records


# -- change stream application ------------------------------------------------


def clear_body(replica: DomDocument, body_id: str | None = None):
    """Drop all body content and non-identity body attributes; the first
    step of applying a snapshot."""
    body = body_id or replica.body_id
    for child in list(replica.nodes[body].children):
        replica.remove_node(child)
    node = replica.nodes[body]
    node.attrs = {k: v for k, v in node.attrs.items() if k == dom.IDENTITY_ATTR}


def apply_changes(replica: DomDocument, changes: list[ChangeRecord],
                  root_alias: dict[str, str] | None = None) -> int:
    """Apply records in order; raises DesyncError leaving the failing record
    unapplied. ``root_alias`` maps the master body id onto the replica's
    scaffold body when the two differ."""
    alias = root_alias or {}
    for index, rec in enumerate(changes):
        try:
            _apply_one(replica, rec, alias)
        except DesyncError:
            raise
        except dom.DomError as exc:
            raise DesyncError(
                f"record {index} ({rec.type} on {rec.node}): {exc}") from exc
    return len(changes)


def _apply_one(replica: DomDocument, rec: ChangeRecord, alias: dict[str, str]):
    if rec.type == dom.CHILD_ADDED:
        parent = alias.get(rec.parent, rec.parent)
        if replica.has_node(rec.node):
            raise DesyncError(f"childAdded {rec.node}: node already present")
        incoming = dom.fragment_element_ids(rec.subtree or "") | set(rec.text_ids)
        clash = sorted(i for i in incoming if replica.has_node(i))
        if clash:
            raise DesyncError(f"childAdded {rec.node}: ids already present: {clash}")
        if not replica.has_node(parent):
            raise DesyncError(f"childAdded {rec.node}: unknown parent {parent}")
        replica.purge_detached(incoming | {rec.node})
        roots = dom.parse_fragment(replica, rec.subtree or "", rec.text_ids or None)
        if len(roots) != 1 or roots[0] != rec.node:
            raise DesyncError(f"childAdded {rec.node}: fragment does not rebuild it")
        replica.insert_node(rec.node, parent, rec.prev_sibling)
    elif rec.type == dom.CHILD_REMOVED:
        replica.remove_node(rec.node)
    elif rec.type == dom.ATTRIBUTE_CHANGED:
        replica.set_attribute(rec.node, rec.attribute, rec.value or "")
    elif rec.type == dom.ATTRIBUTE_REMOVED:
        replica.remove_attribute(rec.node, rec.attribute)
    elif rec.type == dom.TEXT_CHANGED:
        replica.set_text(rec.node, rec.value or "")
    elif rec.type == dom.REPARENTED:
        parent = alias.get(rec.parent, rec.parent)
        replica.move_node(rec.node, parent, rec.prev_sibling)
    else:
        raise DesyncError(f"unknown change type {rec.type!r}")
