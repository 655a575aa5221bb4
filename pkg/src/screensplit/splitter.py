"""Produce the master and slave documents from an annotated document.

The master is the original application with secondary-device content hidden
by a stylesheet rule and the sync runtime injected; the slave is a fresh
scaffold holding the mirrored content with all application logic stripped.
"""

from __future__ import annotations

import json
import uuid
from dataclasses import dataclass, field
from urllib.parse import urljoin, urlsplit

from . import dom
from .annotation import (DEVICE_ATTR, DeviceAssignment, annotation_counts,
                         assignment_of, validate_annotation)
from .dom import DomDocument, IDENTITY_ATTR
from .mapping import GeometryTable, QueryNode, evaluate_query
from .projection import Projection, build_projection, materialize

HIDE_STYLE_ID = "vs-style"
CONFIG_ID = "vs-config"
RUNTIME_SCRIPT_ID = "vs-runtime"
HIDE_RULE = '[data-device="device2"]{display:none !important}'

# attributes that reference external resources and need absolute URLs on
# the slave, which is served from a different origin than the application
URL_ATTRS = ("src", "href", "srcset", "poster", "data")


class SplitError(Exception):
    pass


@dataclass
class SplitResult:
    master: DomDocument
    slave: DomDocument
    session_id: str
    manifest: dict[str, int]
    master_body_id: str = ""
    slave_body_id: str = ""


@dataclass
class TransitionResult:
    """Outcome of a runtime re-split against a live session."""

    split: SplitResult
    slave_changes: list = field(default_factory=list)
    master_annotation_changes: list = field(default_factory=list)


def _append(doc: DomDocument, parent_id: str, node_id: str):
    kids = doc.nodes[parent_id].children
    doc.insert_node(node_id, parent_id, kids[-1] if kids else None)


def _needs_base(value: str) -> bool:
    value = value.strip()
    if not value or value.startswith("#"):
        return False  # empty or same-document reference
    parts = urlsplit(value)
    return not parts.scheme and not parts.netloc


def _absolutize_value(attr: str, value: str, base: str) -> str:
    if attr == "srcset":
        out = []
        for candidate in value.split(","):
            candidate = candidate.strip()
            if not candidate:
                continue
            bits = candidate.split(None, 1)
            url = urljoin(base, bits[0]) if _needs_base(bits[0]) else bits[0]
            out.append(url if len(bits) == 1 else f"{url} {bits[1]}")
        return ", ".join(out)
    return urljoin(base, value)


def _srcset_needs_base(value: str) -> bool:
    return any(_needs_base(c.strip().split(None, 1)[0])
               for c in value.split(",") if c.strip())


def _absolutize_document(doc: DomDocument, base_url: str | None):
    """Make resource references absolute; error if that needs a missing base."""
    offenders: list[str] = []
    for nid in doc.iter_elements():
        node = doc.nodes[nid]
        for attr in URL_ATTRS:
            value = node.attrs.get(attr)
            if value is None:
                continue
            relative = (_srcset_needs_base(value) if attr == "srcset"
                        else _needs_base(value))
            if not relative:
                continue
            if base_url is None:
                offenders.append(f"{nid} ({node.tag}@{attr}={value!r})")
            else:
                node.attrs[attr] = _absolutize_value(attr, value, base_url)
    if offenders:
        raise SplitError(
            "slave content has relative URLs but no base url was given: "
            + "; ".join(offenders))


def _config_json(session_id: str, hub_url: str, role: str) -> str:
    return json.dumps({"session": session_id, "hub": hub_url, "role": role},
                      separators=(",", ":"))


def _inject_runtime(doc: DomDocument, role: str, session_id: str,
                    hub_url: str, runtime_url: str):
    """Idempotent: a re-split of an already instrumented master refreshes
    the existing elements instead of stacking duplicates."""
    head = doc.head_id
    existing = {doc.nodes[nid].attrs.get("id"): nid
                for nid in doc.nodes[head].children
                if doc.nodes[nid].kind == dom.ELEMENT}

    if role == "master" and HIDE_STYLE_ID not in existing:
        style = doc.create_element("style", {"id": HIDE_STYLE_ID})
        doc.create_text(HIDE_RULE, parent=style)
        _append(doc, head, style)

    if CONFIG_ID in existing:
        config = existing[CONFIG_ID]
        (text,) = doc.nodes[config].children
        doc.set_text(text, _config_json(session_id, hub_url, role))
    else:
        config = doc.create_element(
            "script", {"type": "application/json", "id": CONFIG_ID})
        doc.create_text(_config_json(session_id, hub_url, role), parent=config)
        _append(doc, head, config)

    if RUNTIME_SCRIPT_ID not in existing:
        script = doc.create_element("script",
                                    {"src": runtime_url, "id": RUNTIME_SCRIPT_ID})
        _append(doc, head, script)


def _build_slave(annotated: DomDocument, proj: Projection) -> tuple[DomDocument, str]:
    slave = DomDocument(base_url=annotated.base_url, id_prefix="s")
    # reserve every id the master session knows so adoption cannot collide
    slave._seen.update(annotated._seen)

    def scaffold(tag: str, source_id: str | None) -> str:
        attrs: dict[str, str] = {}
        if source_id is not None:
            carried = assignment_of(annotated, source_id)
            if carried in (DeviceAssignment.DEVICE2, DeviceAssignment.BOTH):
                node = annotated.nodes[source_id]
                attrs = {k: v for k, v in node.attrs.items()
                         if not k.startswith("on")}
        return slave.create_element(tag, attrs)

    html = scaffold("html", annotated.html_id)
    slave.root = html
    slave.nodes[html] = slave._detached.pop(html)
    head = scaffold("head", annotated.head_id)
    _attach_scaffold(slave, html, head)
    body = scaffold("body", annotated.body_id)
    _attach_scaffold(slave, html, body)

    # head: copy both-devices resources, minus application scripts and any
    # original <base> (the injected one wins when a base url is known)
    src_head = annotated.head_id
    if src_head is not None:
        for child in annotated.nodes[src_head].children:
            node = annotated.nodes[child]
            if node.kind != dom.ELEMENT:
                kids = slave.nodes[head].children
                if (node.kind == dom.TEXT and kids
                        and slave.nodes[kids[-1]].kind == dom.TEXT):
                    # pruned scripts can leave text runs markup cannot keep apart
                    slave.nodes[kids[-1]].text += node.text
                    continue
                copy = (slave.create_text(node.text) if node.kind == dom.TEXT
                        else slave.create_comment(node.text))
                _append(slave, head, copy)
                continue
            if node.tag == "script":
                continue
            if node.tag == "base" and annotated.base_url:
                continue
            if assignment_of(annotated, child) is not DeviceAssignment.BOTH:
                continue
            _append(slave, head, _copy_head_subtree(annotated, child, slave))

    for top in proj.top_level:
        _append(slave, body, materialize(proj, top, slave))
    return slave, body


def _attach_scaffold(doc: DomDocument, parent: str, child: str):
    doc.nodes[child] = doc._detached.pop(child)
    doc.nodes[parent].children.append(child)
    doc.nodes[child].parent = parent


def _copy_head_subtree(src: DomDocument, node_id: str, dst: DomDocument) -> str:
    node = src.nodes[node_id]
    if node.kind != dom.ELEMENT:
        return (dst.create_text(node.text) if node.kind == dom.TEXT
                else dst.create_comment(node.text))
    attrs = {k: v for k, v in node.attrs.items() if not k.startswith("on")}
    attrs[IDENTITY_ATTR] = node_id
    made = dst.create_element(node.tag, attrs)
    for child in node.children:
        if src.nodes[child].kind == dom.ELEMENT and src.nodes[child].tag == "script":
            continue
        child_id = _copy_head_subtree(src, child, dst)
        dst._detached[made].children.append(child_id)
        dst._detached[child_id].parent = made
    return made


def split(annotated: DomDocument,
          runtime_master_url: str = "/runtime/master.js",
          runtime_slave_url: str = "/runtime/slave.js",
          hub_url: str = "ws://localhost:8765/sync",
          session_id: str | None = None) -> SplitResult:
    """Build the instrumented master and the mirrored slave document."""
    violations = validate_annotation(annotated)
    if violations:
        raise SplitError("document is not fully annotated: "
                         + "; ".join(str(v) for v in violations[:5]))
    session_id = session_id or uuid.uuid4().hex[:12]

    master = annotated.clone()
    _inject_runtime(master, "master", session_id, hub_url, runtime_master_url)

    proj = build_projection(annotated)
    slave, slave_body = _build_slave(annotated, proj)
    _absolutize_document(slave, annotated.base_url)
    if annotated.base_url:
        base = slave.create_element("base", {"href": annotated.base_url})
        slave.insert_node(base, slave.head_id, None)
    _inject_runtime(slave, "slave", session_id, hub_url, runtime_slave_url)

    return SplitResult(
        master=master,
        slave=slave,
        session_id=session_id,
        manifest=annotation_counts(annotated),
        master_body_id=annotated.body_id,
        slave_body_id=slave_body,
    )


def runtime_split_request(master_doc: DomDocument, query: QueryNode,
                          geometry: GeometryTable | None = None,
                          threshold: float = 0.5,
                          session_id: str | None = None,
                          runtime_master_url: str = "/runtime/master.js",
                          runtime_slave_url: str = "/runtime/slave.js",
                          hub_url: str = "ws://localhost:8765/sync") -> TransitionResult:
    """Re-map, re-annotate and re-split a live master document, plus the
    messages that carry an already-connected pair to the new state."""
    from .annotation import annotate  # local import avoids a cycle at import time
    from .protocol import reconcile_projections

    pre_proj = build_projection(master_doc)
    pre_assignments = {nid: master_doc.nodes[nid].attrs.get(DEVICE_ATTR)
                       for nid in master_doc.iter_elements()
                       if master_doc.nodes[nid].attrs.get(IDENTITY_ATTR)}

    work = master_doc.clone()
    for nid in work.iter_elements():
        work.nodes[nid].attrs.pop(DEVICE_ATTR, None)
    lists = evaluate_query(work, query, geometry, threshold)
    annotated = annotate(work, lists)

    result = split(annotated, runtime_master_url, runtime_slave_url,
                   hub_url, session_id)
    post_proj = build_projection(result.master)

    slave_changes = reconcile_projections(pre_proj, post_proj)
    annotation_changes = []
    for nid, old in pre_assignments.items():
        new = result.master.nodes.get(nid)
        if new is None:
            continue
        token = new.attrs.get(DEVICE_ATTR)
        if token != old:
            annotation_changes.append({"type": "attributeChanged", "node": nid,
                                       "attribute": DEVICE_ATTR, "value": token})
    return TransitionResult(split=result, slave_changes=slave_changes,
                            master_annotation_changes=annotation_changes)
