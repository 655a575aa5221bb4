"""The slave-side view of an annotated master document.

A projection keeps exactly the mirrored content: elements whose effective
assignment is device2/both, with device1 descendants pruned, script elements
and declarative handlers dropped, and device2/both islands under device1
parents promoted to top level. The splitter renders it into the initial
slave document; the sync layer diffs consecutive projections into change
records; tests use it as the convergence oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import dom
from .annotation import (DEVICE_ATTR, DeviceAssignment, assignment_of,
                         effective_assignment)
from .dom import DomDocument, IDENTITY_ATTR


@dataclass
class ProjNode:
    id: str
    kind: str
    tag: str = ""
    attrs: dict[str, str] = field(default_factory=dict)
    text: str = ""
    children: list[str] = field(default_factory=list)
    parent: str | None = None


@dataclass
class Projection:
    body_id: str
    body_attrs: dict[str, str]
    nodes: dict[str, ProjNode] = field(default_factory=dict)
    top_level: list[str] = field(default_factory=list)

    def children_of(self, node_id: str) -> list[str]:
        if node_id == self.body_id:
            return list(self.top_level)
        return list(self.nodes[node_id].children)

    def subtree_ids(self, node_id: str):
        yield node_id
        for child in self.nodes[node_id].children:
            yield from self.subtree_ids(child)


def _mirrored_attrs(attrs: dict[str, str]) -> dict[str, str]:
    """Slave-visible attributes: declarative handlers and the persisted
    identity stay out (identity rides on the node id)."""
    return {k: v for k, v in attrs.items()
            if not k.startswith("on") and k != IDENTITY_ATTR}


def _present(doc: DomDocument, node_id: str) -> bool:
    node = doc.nodes[node_id]
    if node.kind != dom.ELEMENT or node.tag == "script":
        return False
    return effective_assignment(doc, node_id) in (DeviceAssignment.DEVICE2,
                                                  DeviceAssignment.BOTH)


def build_projection(doc: DomDocument) -> Projection:
    """Project an annotated master document onto the secondary device."""
    body = doc.body_id
    assert body is not None, "document has no body"
    body_present = assignment_of(doc, body) in (DeviceAssignment.DEVICE2,
                                                DeviceAssignment.BOTH)
    proj = Projection(
        body_id=body,
        body_attrs=_mirrored_attrs(doc.nodes[body].attrs) if body_present else {},
    )

    def append_child(siblings: list[str], nid: str):
        """Append, merging adjacent text runs: pruning can leave two master
        text nodes side by side, which markup cannot keep apart. The merged
        node keeps the first id; diffs and replicas then agree byte for byte."""
        node = proj.nodes[nid]
        if node.kind == dom.TEXT and siblings:
            prev = proj.nodes[siblings[-1]]
            if prev.kind == dom.TEXT:
                prev.text += node.text
                del proj.nodes[nid]
                return
        siblings.append(nid)

    def copy_subtree(nid: str, parent: str | None):
        node = doc.nodes[nid]
        if node.kind != dom.ELEMENT:
            proj.nodes[nid] = ProjNode(id=nid, kind=node.kind, text=node.text,
                                       parent=parent)
            return True
        if not _present(doc, nid):
            return False  # pruned; in-scope islands below surface at top level
        pn = ProjNode(id=nid, kind=dom.ELEMENT, tag=node.tag,
                      attrs=_mirrored_attrs(node.attrs), parent=parent)
        proj.nodes[nid] = pn
        for child in node.children:
            if copy_subtree(child, nid):
                append_child(pn.children, child)
        return True

    def scan(nid: str):
        """Document-order hunt for top-level content outside copied subtrees."""
        for child in doc.nodes[nid].children:
            node = doc.nodes[child]
            if node.kind != dom.ELEMENT:
                if nid == body and body_present:
                    copy_subtree(child, None)
                    append_child(proj.top_level, child)
                continue
            if _present(doc, child):
                copy_subtree(child, None)
                proj.top_level.append(child)
                # promoted islands under pruned descendants still need a scan
                scan_pruned_regions(child)
            else:
                scan(child)

    def scan_pruned_regions(nid: str):
        for child in doc.nodes[nid].children:
            node = doc.nodes[child]
            if node.kind != dom.ELEMENT:
                continue
            if _present(doc, child):
                scan_pruned_regions(child)
            else:
                scan(child)

    scan(body)
    return proj


def materialize(proj: Projection, node_id: str, target: DomDocument) -> str:
    """Rebuild a projected subtree as detached nodes of ``target``,
    preserving ids (element identity also lands in ``data-vs-id``)."""
    node = proj.nodes[node_id]
    if node.kind != dom.ELEMENT:
        if not target._adopt_id(node.id):
            raise dom.DomError(f"id {node.id!r} already lives in target document")
        fresh = dom.DomNode(id=node.id, kind=node.kind, text=node.text)
        target._detached[node.id] = fresh
        return node.id
    attrs = dict(node.attrs)
    attrs[IDENTITY_ATTR] = node.id
    made = target.create_element(node.tag, attrs)
    if made != node.id:
        raise dom.DomError(f"id {node.id!r} already lives in target document")
    for child in node.children:
        child_id = materialize(proj, child, target)
        target._detached[made].children.append(child_id)
        target._detached[child_id].parent = made
    return made


def serialize_subtree(proj: Projection, node_id: str) -> tuple[str, list[str]]:
    """Projected subtree as an HTML fragment plus DFS text/comment ids."""
    scratch = DomDocument()
    root = materialize(proj, node_id, scratch)
    return scratch.serialize_fragment(root), scratch.fragment_text_ids(root)


def projection_matches_document(proj: Projection, doc: DomDocument,
                                body_id: str | None = None) -> bool:
    """Does a replica document's body render exactly this projection?

    Ignores engine-injected head content by comparing bodies only.
    """
    body = body_id or doc.body_id
    if body is None:
        return False
    doc_body = doc.nodes[body]
    doc_attrs = {k: v for k, v in doc_body.attrs.items() if k != IDENTITY_ATTR}
    if proj.body_attrs and doc_attrs != proj.body_attrs:
        return False

    def match(pid: str, nid: str) -> bool:
        pn = proj.nodes[pid]
        dn = doc.nodes[nid]
        if pn.kind != dn.kind:
            return False
        if pn.kind != dom.ELEMENT:
            return pn.text == dn.text
        if pn.id != nid or pn.tag != dn.tag:
            return False
        if _mirrored_attrs(dn.attrs) != pn.attrs:
            return False
        if len(pn.children) != len(dn.children):
            return False
        return all(match(p, d) for p, d in zip(pn.children, dn.children))

    if len(proj.top_level) != len(doc_body.children):
        return False
    return all(match(p, d) for p, d in zip(proj.top_level, doc_body.children))


def projection_diff_description(proj: Projection, doc: DomDocument,
                                body_id: str | None = None) -> str:
    """Short human-readable first divergence, for failing assertions."""
    body = body_id or doc.body_id
    doc_body = doc.nodes[body]

    def describe(pid, nid, path):
        pn, dn = proj.nodes[pid], doc.nodes[nid]
        if pn.kind != dn.kind:
            return f"{path}: kind {pn.kind} != {dn.kind}"
        if pn.kind != dom.ELEMENT:
            if pn.text != dn.text:
                return f"{path}: text {pn.text!r} != {dn.text!r}"
            return None
        if pn.id != nid:
            return f"{path}: id {pn.id} != {nid}"
        if pn.tag != dn.tag:
            return f"{path}: tag {pn.tag} != {dn.tag}"
        if _mirrored_attrs(dn.attrs) != pn.attrs:
            return f"{path}: attrs {pn.attrs} != {_mirrored_attrs(dn.attrs)}"
        if len(pn.children) != len(dn.children):
            return (f"{path}: {len(pn.children)} projected children != "
                    f"{len(dn.children)} in replica")
        for p, d in zip(pn.children, dn.children):
            found = describe(p, d, f"{path}/{pn.tag}")
            if found:
                return found
        return None

    if len(proj.top_level) != len(doc_body.children):
        return (f"body: {len(proj.top_level)} projected children != "
                f"{len(doc_body.children)} in replica")
    for p, d in zip(proj.top_level, doc_body.children):
        found = describe(p, d, "body")
        if found:
            return found
    return "no divergence"
