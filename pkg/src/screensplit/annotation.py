"""Totalize device lists into per-element ``data-device`` annotations.

Listed elements keep their device; the rest inherit from agreeing siblings,
then agreeing children, and fall back to "present on both devices". The
result is a document where every element names its target device(s) and
carries a persisted identity.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from . import dom
from .dom import DomDocument, IDENTITY_ATTR
from .mapping import DeviceLists

DEVICE_ATTR = "data-device"


class DeviceAssignment(enum.Enum):
    DEVICE1 = "device1"
    DEVICE2 = "device2"
    BOTH = "dev1&dev2"


_TOKENS = {a.value: a for a in DeviceAssignment}


class AnnotationError(ValueError):
    pass


@dataclass
class Violation:
    node: str
    problem: str

    def __str__(self):
        return f"{self.node}: {self.problem}"


def assignment_of(doc: DomDocument, node_id: str) -> DeviceAssignment | None:
    """The element's own annotation, if valid."""
    node = doc.nodes.get(node_id)
    if node is None or node.kind != dom.ELEMENT:
        return None
    return _TOKENS.get(node.attrs.get(DEVICE_ATTR, ""))


def effective_assignment(doc: DomDocument, node_id: str) -> DeviceAssignment | None:
    """Nearest self-or-ancestor annotation; how dynamic content inherits."""
    cur: str | None = node_id
    while cur is not None:
        node = doc.nodes.get(cur)
        if node is None:
            return None
        if node.kind == dom.ELEMENT:
            token = _TOKENS.get(node.attrs.get(DEVICE_ATTR, ""))
            if token is not None:
                return token
        cur = node.parent
    return None


def in_scope(doc: DomDocument, node_id: str) -> bool:
    """True if changes to this node must be mirrored to the secondary device:
    inside the body subtree and effectively device2 or both-devices."""
    body = doc.body_id
    decided: DeviceAssignment | None = None
    reached_body = False
    cur: str | None = node_id
    while cur is not None:
        node = doc.nodes.get(cur)
        if node is None:
            return False
        if node.kind == dom.ELEMENT and decided is None:
            decided = _TOKENS.get(node.attrs.get(DEVICE_ATTR, ""))
        if cur == body:
            reached_body = True
            break
        cur = node.parent
    return reached_body and decided in (DeviceAssignment.DEVICE2, DeviceAssignment.BOTH)


def annotate(doc: DomDocument, lists: DeviceLists) -> DomDocument:
    """Return an annotated copy; the input document is left untouched."""
    listed = set(lists.primary) | set(lists.secondary)
    if len(listed) != len(lists.primary) + len(lists.secondary):
        raise AnnotationError("device lists overlap")
    missing = [nid for nid in listed if nid not in doc.nodes]
    if missing:
        raise AnnotationError(f"device lists reference unknown ids: {missing}")

    out = doc.clone()
    value: dict[str, DeviceAssignment] = {}

    # step 1: listed elements keep their device; head serves both
    for nid in lists.primary:
        value[nid] = DeviceAssignment.DEVICE1
    for nid in lists.secondary:
        value[nid] = DeviceAssignment.DEVICE2
    head = out.head_id
    if head is not None and head not in listed:
        value[head] = DeviceAssignment.BOTH

    elements = list(out.iter_elements())

    def element_children(nid: str) -> list[str]:
        return [c for c in out.nodes[nid].children
                if out.nodes[c].kind == dom.ELEMENT]

    # step 2: unannotated leaves adopt agreeing sibling annotations,
    # evaluated against the step-1 state so order cannot matter
    step1 = dict(value)
    for nid in elements:
        if nid in value or element_children(nid):
            continue
        parent = out.nodes[nid].parent
        if parent is None:
            continue
        sibling_values = {step1[s] for s in element_children(parent)
                          if s != nid and s in step1}
        if len(sibling_values) == 1:
            value[nid] = next(iter(sibling_values))
        elif len(sibling_values) > 1:
            value[nid] = DeviceAssignment.BOTH
        # no annotated siblings: deferred to the parent pass

    # step 3: unannotated parents adopt their children's agreement, bottom-up
    for nid in reversed(elements):
        if nid in value:
            continue
        kids = element_children(nid)
        if not kids or any(k not in value for k in kids):
            continue
        kid_values = {value[k] for k in kids}
        value[nid] = kid_values.pop() if len(kid_values) == 1 else DeviceAssignment.BOTH

    # step 4: whatever is still undecided serves both devices
    for nid in elements:
        if nid not in value:
            value[nid] = DeviceAssignment.BOTH

    for nid in elements:
        node = out.nodes[nid]
        node.attrs[DEVICE_ATTR] = value[nid].value
        node.attrs[IDENTITY_ATTR] = nid
    return out


def validate_annotation(doc: DomDocument) -> list[Violation]:
    """Report elements without a device, with an unknown token, or without
    a persisted identity."""
    problems: list[Violation] = []
    for nid in doc.iter_elements():
        attrs = doc.nodes[nid].attrs
        token = attrs.get(DEVICE_ATTR)
        if token is None:
            problems.append(Violation(nid, f"missing {DEVICE_ATTR}"))
        elif token not in _TOKENS:
            problems.append(Violation(nid, f"unknown device token {token!r}"))
        if not attrs.get(IDENTITY_ATTR):
            problems.append(Violation(nid, f"missing {IDENTITY_ATTR}"))
    return problems


def annotation_counts(doc: DomDocument) -> dict[str, int]:
    """Element counts per assignment, as recorded in the split manifest."""
    hidden = shared = 0
    for nid in doc.iter_elements():
        assignment = assignment_of(doc, nid)
        if assignment is DeviceAssignment.DEVICE2:
            hidden += 1
        elif assignment is DeviceAssignment.BOTH:
            shared += 1
    return {"hidden_count": hidden, "shared_count": shared,
            "mirrored_count": hidden + shared}
