"""Shared helpers: seeded random document/mutation generators and fixtures."""

from __future__ import annotations

import random
from pathlib import Path

import pytest

from screensplit import dom

FIXTURES = Path(__file__).parent.parent / "fixtures"
SCENARIOS = Path(__file__).parent.parent / "scenarios"

# What each container tag may hold, kept parser-safe: no auto-closing
# nestings, nothing inside voids, text only in normal elements.
_BLOCK = ["div", "section", "article", "nav", "form"]
_PHRASING = ["span", "em", "b", "a", "button", "label"]
_PHRASING_LEAF = ["img", "input"]
_WORDS = ["alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf",
          "hotel", "india", "juliet"]


def _random_word(rng: random.Random) -> str:
    return rng.choice(_WORDS)


def random_tree_markup(rng: random.Random, budget: int) -> str:
    """Generate body markup with at most ``budget`` elements."""
    out: list[str] = []
    count = 0

    def attrs(tag: str) -> str:
        parts = []
        if rng.random() < 0.5:
            parts.append(f' class="{_random_word(rng)}"')
        if rng.random() < 0.15:
            parts.append(f' title="{_random_word(rng)}"')
        if tag == "a" and rng.random() < 0.5:
            parts.append(' href="https://example.com/page"')
        if tag == "img":
            parts.append(' src="https://example.com/pic.png"')
        if rng.random() < 0.1:
            parts.append(' onclick="go()"')
        return "".join(parts)

    def emit(tag: str, depth: int):
        nonlocal count
        count += 1
        if tag in _PHRASING_LEAF:
            out.append(f"<{tag}{attrs(tag)}>")
            return
        out.append(f"<{tag}{attrs(tag)}>")
        if tag == "ul":
            for _ in range(rng.randint(1, 3)):
                if count >= budget:
                    break
                emit("li", depth + 1)
        else:
            n_children = rng.randint(0, 3 if depth < 4 else 1)
            for _ in range(n_children):
                if count >= budget:
                    break
                roll = rng.random()
                if roll < 0.35:
                    out.append(_random_word(rng))
                    continue
                if tag in _BLOCK or tag == "li":
                    pool = _BLOCK + _PHRASING + _PHRASING_LEAF + ["p", "h2", "ul", "video"]
                else:
                    pool = _PHRASING + _PHRASING_LEAF
                emit(rng.choice(pool), depth + 1)
        if rng.random() < 0.5:
            out.append(_random_word(rng))
            pass
        out.append(f"</{tag}>")

    while count < budget:
        emit(rng.choice(_BLOCK + ["p", "ul", "h2", "video", "button"]), 0)
        if rng.random() < 0.2:
            break
    return "".join(out)


def random_document(seed: int, budget: int = 40) -> dom.DomDocument:
    rng = random.Random(seed)
    markup = random_tree_markup(rng, budget)
    return dom.parse_html(f"<html><head><title>t</title></head><body>{markup}</body></html>")


def random_device_lists(rng: random.Random, doc: dom.DomDocument):
    """Pick disjoint random primary/secondary element lists under body."""
    body = doc.body_id
    candidates = [nid for nid in doc.iter_subtree(body)
                  if doc.nodes[nid].kind == dom.ELEMENT and nid != body]
    rng.shuffle(candidates)
    cut1 = rng.randint(0, len(candidates))
    cut2 = rng.randint(cut1, len(candidates))
    order = doc.document_position()
    primary = sorted(candidates[:cut1], key=order.__getitem__)
    secondary = sorted(candidates[cut1:cut2], key=order.__getitem__)
    return primary, secondary


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def check_coverage(annotated: dom.DomDocument, res) -> None:
    """Split coverage: visible-master + slave = everything; hidden = slave-only.

    Scripts never reach the slave, so they sit outside the id bookkeeping.
    """
    from screensplit.annotation import DeviceAssignment, assignment_of
    D2, BOTH = DeviceAssignment.DEVICE2, DeviceAssignment.BOTH

    visible, hidden, scripts = set(), set(), set()
    for nid in annotated.iter_elements():
        if annotated.nodes[nid].tag == "script":
            scripts.add(nid)
            continue
        a = assignment_of(annotated, nid)
        (hidden if a is D2 else visible).add(nid)
    assert all(res.master.has_node(nid) for nid in visible | hidden | scripts)
    slave_ids = {res.slave.nodes[nid].attrs[dom.IDENTITY_ATTR]
                 for nid in res.slave.iter_elements()
                 if res.slave.nodes[nid].attrs.get(dom.IDENTITY_ATTR)}
    mirrored = {nid for nid in annotated.iter_elements()
                if assignment_of(annotated, nid) in (D2, BOTH)} - scripts
    assert slave_ids == mirrored
    assert visible | slave_ids >= set(annotated.iter_elements()) - scripts
    assert slave_ids - visible == hidden


class ScenarioOpGenerator:
    """Produce scenario mutation events against a shadow master document.

    The shadow tracks what the simulated master will look like, so generated
    ops always reference live ids and stay parser-safe: no children in voids
    or rawtext, no auto-closing nestings, no adjacent or empty text nodes.
    """

    HOSTS = ("div", "section", "article", "nav", "form", "li", "body",
             "button", "label", "span")
    TAGS = ("span", "em", "b", "p", "div", "button", "video", "img")

    def __init__(self, shadow: dom.DomDocument, rng: random.Random):
        self.doc = shadow
        self.rng = rng
        self.minted = 0

    def _elements(self):
        body = self.doc.body_id
        return [n for n in self.doc.iter_subtree(body)
                if self.doc.nodes[n].kind == dom.ELEMENT
                and self.doc.nodes[n].tag not in ("script", "style")]

    def _hosts(self):
        return [n for n in self._elements() if self.doc.nodes[n].tag in self.HOSTS]

    def _apply(self, op: dict) -> dict:
        if op["op"] == "insert":
            roots = dom.parse_fragment(self.doc, op["html"])
            self.doc.insert_node(roots[0], op["parent"], op.get("prev"))
        elif op["op"] == "remove":
            self.doc.remove_node(op["target"])
        elif op["op"] == "move":
            self.doc.move_node(op["target"], op["parent"], op.get("prev"))
        elif op["op"] == "set_attribute":
            self.doc.set_attribute(op["target"], op["name"], op["value"])
        elif op["op"] == "remove_attribute":
            self.doc.remove_attribute(op["target"], op["name"])
        elif op["op"] == "set_text":
            texts = [c for c in self.doc.nodes[op["target"]].children
                     if self.doc.nodes[c].kind == dom.TEXT]
            self.doc.set_text(texts[op["text_index"]], op["value"])
        return op

    def _can_place(self, parent: str, tag: str) -> bool:
        probe = dom.DomNode(id="?", kind=dom.ELEMENT, tag=tag)
        try:
            self.doc._guard_child(self.doc.nodes[parent], probe)
            return True
        except dom.DomError:
            return False

    def _removal_leaves_text_run(self, node: str) -> bool:
        parent = self.doc.nodes[node].parent
        kids = self.doc.nodes[parent].children
        idx = kids.index(node)
        before = self.doc.nodes[kids[idx - 1]].kind if idx > 0 else None
        after = self.doc.nodes[kids[idx + 1]].kind if idx + 1 < len(kids) else None
        return before == dom.TEXT and after == dom.TEXT

    def next_op(self) -> dict | None:
        rng = self.rng
        elements = self._elements()
        if not elements:
            return None
        kind = rng.choice(["set_attribute", "set_attribute", "set_text", "insert",
                           "insert", "remove", "move", "remove_attribute",
                           "listener"])
        if kind == "set_attribute":
            return self._apply({"op": "set_attribute",
                                "target": rng.choice(elements),
                                "name": rng.choice(["class", "title", "data-k"]),
                                "value": f"v{rng.randint(0, 9)}"})
        if kind == "listener":
            return self._apply({"op": "set_attribute",
                                "target": rng.choice(elements),
                                "name": "onclick", "value": "go()"})
        if kind == "remove_attribute":
            return self._apply({"op": "remove_attribute",
                                "target": rng.choice(elements),
                                "name": rng.choice(["class", "title"])})
        if kind == "set_text":
            with_text = [(n, i) for n in elements
                         for i, c in enumerate(
                             [c for c in self.doc.nodes[n].children
                              if self.doc.nodes[c].kind == dom.TEXT])]
            if not with_text:
                return None
            target, index = rng.choice(with_text)
            return self._apply({"op": "set_text", "target": target,
                                "text_index": index,
                                "value": f"w{rng.randint(0, 999)}"})
        if kind == "insert":
            hosts = self._hosts()
            if not hosts:
                return None
            parent = rng.choice(hosts)
            tag = rng.choice(self.TAGS)
            if not self._can_place(parent, tag):
                return None
            self.minted += 1
            nid = f"fz{self.minted}"
            text = f"t{rng.randint(0, 999)}" if (
                rng.random() < 0.7 and tag not in dom.VOID_ELEMENTS) else ""
            html = (f'<{tag} data-vs-id="{nid}" class="gen">{text}</{tag}>'
                    if tag not in dom.VOID_ELEMENTS
                    else f'<{tag} data-vs-id="{nid}" class="gen">')
            kids = self.doc.nodes[parent].children
            prev = rng.choice([None] + kids) if kids else None
            return self._apply({"op": "insert", "parent": parent,
                                "prev": prev, "html": html})
        if kind == "remove":
            movable = [n for n in elements if n != self.doc.body_id]
            if len(movable) < 3:
                return None
            victim = rng.choice(movable)
            if self._removal_leaves_text_run(victim):
                return None
            return self._apply({"op": "remove", "target": victim})
        if kind == "move":
            hosts = self._hosts()
            movable = [n for n in elements if n != self.doc.body_id]
            if not hosts or not movable:
                return None
            node = rng.choice(movable)
            parent = rng.choice(hosts)
            if parent == node or parent in set(self.doc.iter_subtree(node)):
                return None
            if not self._can_place(parent, self.doc.nodes[node].tag):
                return None
            if self._removal_leaves_text_run(node):
                return None
            kids = [k for k in self.doc.nodes[parent].children if k != node]
            prev = rng.choice([None] + kids) if kids else None
            return self._apply({"op": "move", "target": node,
                                "parent": parent, "prev": prev})
        return None

    def event_batches(self, total_ops: int, max_batch: int = 10) -> list[dict]:
        events = []
        at = 0
        while total_ops > 0:
            ops = []
            for _ in range(min(self.rng.randint(1, max_batch), total_ops)):
                op = self.next_op()
                if op is not None:
                    ops.append(op)
                total_ops -= 1
            if ops:
                at += 1
                events.append({"at": at, "action": "mutate", "ops": ops})
        return events
