"""Map document elements onto the two devices.

Evaluates an author/user query (semantic element classes, screen regions,
or boolean combinations of both) against a document and produces the two
per-device element lists that drive annotation and splitting.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field

from . import dom
from .dom import DomDocument

log = logging.getLogger(__name__)


class ElementClass(enum.Enum):
    INTERACTIVE = "interactive"
    MULTIMEDIA = "multimedia"
    VISUAL = "visual"
    OTHER = "other"
    COMPOSITE = "composite"


INTERACTIVE_TAGS = frozenset({
    "a", "area", "button", "datalist", "form", "input", "keygen", "textarea",
    "nav", "optgroup", "option", "output", "select",
})
MULTIMEDIA_TAGS = frozenset({"video", "audio", "source", "track"})
VISUAL_TAGS = frozenset({
    "caption", "dialog", "figcaption", "h1", "h2", "h3", "h4", "h5", "h6",
    "hgroup", "img", "kbd", "label", "legend", "object", "p", "progress",
})
COMPOSITE_TAGS = frozenset({"div", "table", "iframe"})

CLASS_TABLE: dict[str, ElementClass] = {}
for _tag in INTERACTIVE_TAGS:
    CLASS_TABLE[_tag] = ElementClass.INTERACTIVE
for _tag in MULTIMEDIA_TAGS:
    CLASS_TABLE[_tag] = ElementClass.MULTIMEDIA
for _tag in VISUAL_TAGS:
    CLASS_TABLE[_tag] = ElementClass.VISUAL
for _tag in COMPOSITE_TAGS:
    CLASS_TABLE[_tag] = ElementClass.COMPOSITE


class QueryError(ValueError):
    """Malformed mapping query."""


@dataclass(frozen=True)
class Region:
    x: float
    y: float
    width: float
    height: float


@dataclass(frozen=True)
class SemanticCriterion:
    classes: frozenset[ElementClass]


@dataclass(frozen=True)
class RegionCriterion:
    rect: Region


@dataclass
class QueryNode:
    """Boolean query tree; leaves carry one criterion."""

    op: str  # "leaf" | "and" | "or" | "not"
    children: list["QueryNode"] = field(default_factory=list)
    criterion: SemanticCriterion | RegionCriterion | None = None


@dataclass
class DeviceLists:
    primary: list[str] = field(default_factory=list)
    secondary: list[str] = field(default_factory=list)


# GeometryTable: node id -> viewport rectangle, CSS pixels
GeometryTable = dict[str, Region]


def classify_element(tag: str, attrs: dict[str, str]) -> ElementClass:
    """Class of one element; a declarative listener makes it interactive."""
    cls = CLASS_TABLE.get(tag, ElementClass.OTHER)
    if cls is ElementClass.COMPOSITE:
        return cls
    if any(name.startswith("on") for name in attrs):
        return ElementClass.INTERACTIVE
    return cls


def semantic_links(doc: DomDocument) -> list[tuple[str, str]]:
    """(referrer, referee) pairs for label@for, input@list, output@for."""
    by_html_id: dict[str, str] = {}
    for nid in doc.iter_elements():
        html_id = doc.nodes[nid].attrs.get("id")
        if html_id and html_id not in by_html_id:
            by_html_id[html_id] = nid

    pairs: list[tuple[str, str]] = []
    for nid in doc.iter_elements():
        node = doc.nodes[nid]
        if node.tag == "label" and node.attrs.get("for"):
            target = by_html_id.get(node.attrs["for"])
            if target:
                pairs.append((nid, target))
        elif node.tag == "input" and node.attrs.get("list"):
            target = by_html_id.get(node.attrs["list"])
            if target and doc.nodes[target].tag == "datalist":
                pairs.append((nid, target))
        elif node.tag == "output" and node.attrs.get("for"):
            for ref in node.attrs["for"].split():
                target = by_html_id.get(ref)
                if target:
                    pairs.append((nid, target))
    return pairs


def _ordered(doc: DomDocument, ids) -> list[str]:
    position = doc.document_position()
    return sorted(ids, key=position.__getitem__)


def _close_links(doc: DomDocument, assigned: dict[str, str]) -> None:
    """Keep linked pairs on the same device; conflicts go secondary."""
    pairs = semantic_links(doc)
    changed = True
    while changed:
        changed = False
        for a, b in pairs:
            sa, sb = assigned.get(a), assigned.get(b)
            if sa and not sb:
                assigned[b] = sa
                changed = True
            elif sb and not sa:
                assigned[a] = sb
                changed = True
            elif sa and sb and sa != sb:
                # losing interactivity on the secondary device breaks the
                # use case, so conflicting pairs move there together
                assigned[a] = assigned[b] = "secondary"
                changed = True


def _lists_from_assignment(doc: DomDocument, assigned: dict[str, str]) -> DeviceLists:
    return DeviceLists(
        primary=_ordered(doc, [n for n, side in assigned.items() if side == "primary"]),
        secondary=_ordered(doc, [n for n, side in assigned.items() if side == "secondary"]),
    )


def map_semantic(doc: DomDocument, criterion: SemanticCriterion) -> DeviceLists:
    """Walk the body: matching classes go secondary, other known classes go
    primary, 'other' stays unassigned, composites defer to their children."""
    assigned: dict[str, str] = {}
    body = doc.body_id

    def walk(nid: str):
        for child in doc.nodes[nid].children:
            node = doc.nodes[child]
            if node.kind != dom.ELEMENT:
                continue
            cls = classify_element(node.tag, node.attrs)
            if cls is not ElementClass.COMPOSITE:
                if cls in criterion.classes:
                    assigned[child] = "secondary"
                elif cls is not ElementClass.OTHER:
                    assigned[child] = "primary"
            if node.tag != "iframe":  # iframes are opaque leaves
                walk(child)

    if body is not None:
        walk(body)
    _close_links(doc, assigned)
    return _lists_from_assignment(doc, assigned)


def overlap_ratio(bbox: Region, region: Region) -> float:
    """Fraction of bbox area inside region; zero-area boxes test the center."""
    if bbox.width <= 0 or bbox.height <= 0:
        cx = bbox.x + bbox.width / 2
        cy = bbox.y + bbox.height / 2
        inside = (region.x <= cx <= region.x + region.width
                  and region.y <= cy <= region.y + region.height)
        return 1.0 if inside else 0.0
    ix = min(bbox.x + bbox.width, region.x + region.width) - max(bbox.x, region.x)
    iy = min(bbox.y + bbox.height, region.y + region.height) - max(bbox.y, region.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    return (ix * iy) / (bbox.width * bbox.height)


def map_region(doc: DomDocument, criterion: RegionCriterion,
               geometry: GeometryTable, threshold: float = 0.5) -> DeviceLists:
    """Elements mostly inside the rectangle go secondary, other rendered
    elements go primary, elements without geometry stay unassigned."""
    assigned: dict[str, str] = {}
    body = doc.body_id
    if body is None:
        return DeviceLists()

    has_geo_below: dict[str, bool] = {}

    def scan(nid: str) -> bool:
        below = False
        for child in doc.nodes[nid].children:
            if doc.nodes[child].kind == dom.ELEMENT:
                below |= scan(child)
        has_geo_below[nid] = below
        return below or nid in geometry

    scan(body)

    for nid in doc.iter_subtree(body):
        node = doc.nodes[nid]
        if node.kind != dom.ELEMENT or nid == body:
            continue
        bbox = geometry.get(nid)
        if bbox is None:
            continue
        cls = classify_element(node.tag, node.attrs)
        if cls is ElementClass.COMPOSITE and has_geo_below[nid]:
            continue  # descendants decide
        side = "secondary" if overlap_ratio(bbox, criterion.rect) >= threshold \
            else "primary"
        assigned[nid] = side
    return _lists_from_assignment(doc, assigned)


def validate_query(query: QueryNode) -> None:
    leaves = 0

    def check(node: QueryNode):
        nonlocal leaves
        if node.op == "leaf":
            leaves += 1
            crit = node.criterion
            if isinstance(crit, SemanticCriterion):
                if not crit.classes:
                    raise QueryError("semantic criterion needs at least one class")
            elif isinstance(crit, RegionCriterion):
                if crit.rect.width < 0 or crit.rect.height < 0:
                    raise QueryError("region width/height must be non-negative")
            else:
                raise QueryError("leaf without criterion")
            if node.children:
                raise QueryError("leaf cannot have children")
            return
        if node.criterion is not None:
            raise QueryError(f"{node.op!r} node cannot carry a criterion")
        if node.op == "not":
            if len(node.children) != 1:
                raise QueryError("'not' takes exactly one child")
        elif node.op in ("and", "or"):
            if not node.children:
                raise QueryError(f"{node.op!r} needs at least one child")
        else:
            raise QueryError(f"unknown query op {node.op!r}")
        for child in node.children:
            check(child)

    check(query)
    if leaves == 0:
        raise QueryError("query has no criteria")


def evaluate_query(doc: DomDocument, query: QueryNode,
                   geometry: GeometryTable | None = None,
                   threshold: float = 0.5) -> DeviceLists:
    """Evaluate the boolean tree; leaves produce element sets, combinators
    intersect/union/complement them over the assigned domain."""
    validate_query(query)
    geometry = geometry or {}
    all_assigned: set[str] = set()

    def evaluate(node: QueryNode) -> tuple[set[str], set[str]]:
        if node.op == "leaf":
            if isinstance(node.criterion, SemanticCriterion):
                lists = map_semantic(doc, node.criterion)
            else:
                if not geometry:
                    log.warning("region criterion evaluated without geometry; "
                                "no element can match")
                lists = map_region(doc, node.criterion, geometry, threshold)
            secondary = set(lists.secondary)
            domain = secondary | set(lists.primary)
            all_assigned.update(domain)
            return secondary, domain
        results = [evaluate(child) for child in node.children]
        if node.op == "and":
            chosen = set.intersection(*(s for s, _ in results))
        elif node.op == "or":
            chosen = set.union(*(s for s, _ in results))
        else:  # not
            (child_s, child_domain), = results
            chosen = child_domain - child_s
        domain = set.union(*(d for _, d in results))
        return chosen, domain

    secondary_set, _ = evaluate(query)
    return DeviceLists(
        primary=_ordered(doc, all_assigned - secondary_set),
        secondary=_ordered(doc, secondary_set),
    )


# -- JSON formats -----------------------------------------------------------

def query_from_json(data) -> QueryNode:
    if isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise QueryError(f"query is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise QueryError("query must be a JSON object")
    op = data.get("op")
    if op == "leaf":
        crit = data.get("criterion") or {}
        kind = crit.get("kind")
        if kind == "semantic":
            try:
                classes = frozenset(ElementClass(c) for c in crit.get("classes", []))
            except ValueError as exc:
                raise QueryError(f"unknown element class: {exc}") from exc
            node = QueryNode(op="leaf", criterion=SemanticCriterion(classes))
        elif kind == "region":
            try:
                rect = Region(x=float(crit["x"]), y=float(crit["y"]),
                              width=float(crit["w"]), height=float(crit["h"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise QueryError(f"bad region criterion: {exc}") from exc
            node = QueryNode(op="leaf", criterion=RegionCriterion(rect))
        else:
            raise QueryError(f"unknown criterion kind {kind!r}")
    elif op in ("and", "or", "not"):
        node = QueryNode(op=op,
                         children=[query_from_json(c) for c in data.get("children", [])])
    else:
        raise QueryError(f"unknown query op {op!r}")
    return node


def query_to_json(query: QueryNode) -> dict:
    if query.op == "leaf":
        crit = query.criterion
        if isinstance(crit, SemanticCriterion):
            body = {"kind": "semantic",
                    "classes": sorted(c.value for c in crit.classes)}
        else:
            rect = crit.rect
            body = {"kind": "region", "x": rect.x, "y": rect.y,
                    "w": rect.width, "h": rect.height}
        return {"op": "leaf", "criterion": body}
    return {"op": query.op, "children": [query_to_json(c) for c in query.children]}


def geometry_from_json(data) -> GeometryTable:
    if isinstance(data, str):
        data = json.loads(data)
    table: GeometryTable = {}
    for nid, rect in data.items():
        table[nid] = Region(x=float(rect["x"]), y=float(rect["y"]),
                            width=float(rect["w"]), height=float(rect["h"]))
    return table


def geometry_to_json(table: GeometryTable) -> dict:
    return {nid: {"x": r.x, "y": r.y, "w": r.width, "h": r.height}
            for nid, r in table.items()}
