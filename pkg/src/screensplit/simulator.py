"""Deterministic in-process simulation of a full mirroring session.

Runs a master document and a slave replica through the complete protocol
stack (split, encode/decode, seq tracking, desync recovery) with scripted
events and optional fault injection, without a browser or a network. Given
the same scenario, the transcript and final documents are identical.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from . import dom, protocol
from .annotation import annotate
from .dom import DomDocument
from .mapping import GeometryTable, QueryNode, evaluate_query, geometry_from_json, query_from_json
from .projection import (build_projection, projection_diff_description,
                         projection_matches_document)
from .protocol import (BYE, CHANGES, HELLO, INTERACTION, RESYNC, SPLIT_REQUEST,
                       ChangeCollector, DesyncError, InteractionRecord,
                       SyncMessage, apply_changes, changes_message, decode,
                       encode, records_of)
from .splitter import SplitResult, runtime_split_request, split


class ScenarioError(ValueError):
    pass


@dataclass
class Fault:
    type: str                 # drop | duplicate | swap
    direction: str            # to_slave | to_master
    index: int | None = None  # nth message of `kind` in that direction
    kind: str = CHANGES


@dataclass
class Scenario:
    name: str
    html: str
    query: QueryNode
    geometry: GeometryTable = field(default_factory=dict)
    base_url: str | None = None
    threshold: float = 0.5
    seed: int = 0
    events: list[dict] = field(default_factory=list)
    faults: list[Fault] = field(default_factory=list)
    expect: dict = field(default_factory=dict)

    @classmethod
    def from_json(cls, data, html_loader=None) -> "Scenario":
        if isinstance(data, str):
            try:
                data = json.loads(data)
            except json.JSONDecodeError as exc:
                raise ScenarioError(f"scenario is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ScenarioError("scenario must be a JSON object")
        if "html" in data:
            html = data["html"]
        elif "fixture" in data and html_loader is not None:
            html = html_loader(data["fixture"])
        else:
            raise ScenarioError("scenario needs 'html' or a loadable 'fixture'")
        if "query" not in data:
            raise ScenarioError("scenario needs a 'query'")
        try:
            query = query_from_json(data["query"])
        except Exception as exc:
            raise ScenarioError(f"bad scenario query: {exc}") from exc
        faults = []
        for raw in data.get("faults", []):
            ftype = raw.get("type")
            direction = raw.get("direction", "to_slave")
            if ftype not in ("drop", "duplicate", "swap"):
                raise ScenarioError(f"unknown fault type {ftype!r}")
            if direction not in ("to_slave", "to_master"):
                raise ScenarioError(f"unknown fault direction {direction!r}")
            faults.append(Fault(type=ftype, direction=direction,
                                index=raw.get("index"),
                                kind=raw.get("kind", CHANGES)))
        events = data.get("events", [])
        if not isinstance(events, list):
            raise ScenarioError("'events' must be a list")
        return cls(
            name=data.get("name", "unnamed"),
            html=html,
            query=query,
            geometry=geometry_from_json(data.get("geometry", {})),
            base_url=data.get("base_url"),
            threshold=data.get("threshold", 0.5),
            seed=data.get("seed", 0),
            events=sorted(events, key=lambda e: e.get("at", 0)),
            faults=faults,
            expect=data.get("expect", {}),
        )


@dataclass
class SimulationResult:
    converged: bool
    divergence: str
    transcript: list[dict]
    master: DomDocument
    slave: DomDocument
    expect_failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.converged and not self.expect_failures

    def transcript_json(self) -> str:
        return json.dumps(self.transcript, indent=2)


class _MasterEndpoint:
    """Engine-side master: owns the document, emits Changes, answers Resync."""

    def __init__(self, sim: "_Simulation", result: SplitResult):
        self.sim = sim
        self.session = result.session_id
        self.doc = result.master
        self.collector = ChangeCollector(self.doc)
        self.seq = 0
        self.split_result = result

    def _send(self, kind: str, payload: dict | None = None,
              records=None, snapshot=False):
        self.seq += 1
        if kind == CHANGES:
            msg = changes_message(self.session, self.seq, records or [],
                                  snapshot=snapshot)
        else:
            msg = SyncMessage(session=self.session, seq=self.seq, kind=kind,
                              payload=payload or {})
        self.sim.send("to_slave", msg)

    def hello(self):
        self._send(HELLO, {"role": "master"})

    def flush_changes(self):
        records = self.collector.flush()
        if records:
            self._send(CHANGES, records=records)

    def bye(self):
        self._send(BYE, {"final_seq": self.seq})

    def on_message(self, msg: SyncMessage):
        if msg.kind == RESYNC:
            records = self.collector.snapshot_records()
            self._send(CHANGES, records=records, snapshot=True)
        elif msg.kind == INTERACTION:
            record = InteractionRecord.from_wire(msg.payload)
            effect = self.sim.interaction_effects.get(
                (record.node, record.event_type), [])
            for op in effect:
                self.sim.apply_master_op(op)
            self.flush_changes()
        elif msg.kind == SPLIT_REQUEST:
            self.split_with(query_from_json(msg.payload), self.sim.scenario.geometry)

    def split_with(self, query: QueryNode, geometry: GeometryTable):
        result = runtime_split_request(
            self.doc, query, geometry, threshold=self.sim.scenario.threshold,
            session_id=self.session)
        self.doc = result.split.master
        self.split_result = result.split
        self.collector = ChangeCollector(self.doc)
        if result.slave_changes:
            self._send(CHANGES, records=result.slave_changes)


class _SlaveEndpoint:
    """Replica side: applies Changes in seq order, recovers via Resync."""

    def __init__(self, sim: "_Simulation", session: str, replica: DomDocument,
                 root_alias: dict[str, str]):
        self.sim = sim
        self.session = session
        self.replica = replica
        self.root_alias = root_alias
        self.seq = 0
        self.last_seen = 0
        self.awaiting_snapshot = False

    def _send(self, kind: str, payload: dict | None = None):
        self.seq += 1
        msg = SyncMessage(session=self.session, seq=self.seq, kind=kind,
                          payload=payload or {})
        self.sim.send("to_master", msg)

    def hello(self):
        self._send(HELLO, {"role": "slave"})

    def request_resync(self):
        self.awaiting_snapshot = True
        self._send(RESYNC, {"last_seq": self.last_seen})

    def interact(self, record: InteractionRecord):
        self._send(INTERACTION, record.to_wire())

    def on_message(self, msg: SyncMessage):
        if msg.kind == CHANGES:
            self._on_changes(msg)
        elif msg.kind == BYE:
            final = msg.payload.get("final_seq")
            if isinstance(final, int) and final > self.last_seen:
                self.request_resync()

    def _on_changes(self, msg: SyncMessage):
        snapshot = bool(msg.payload.get("snapshot"))
        if self.awaiting_snapshot and not snapshot:
            return  # stale in-flight batch; the snapshot supersedes it
        if not self.awaiting_snapshot:
            if msg.seq <= self.last_seen:
                return  # duplicate delivery
            if msg.seq > self.last_seen + 1:
                self.request_resync()
                return
        try:
            records = records_of(msg)
            if snapshot:
                protocol.clear_body(self.replica)
            apply_changes(self.replica, records, root_alias=self.root_alias)
        except (DesyncError, protocol.ProtocolError):
            self.last_seen = msg.seq
            self.request_resync()
            return
        self.last_seen = msg.seq
        self.awaiting_snapshot = False


class _Simulation:
    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.rng = random.Random(scenario.seed)
        self.transcript: list[dict] = []
        self.clock = 0
        self.connected = {"master": True, "slave": True}
        self.buffers: dict[str, list[bytes]] = {"to_slave": [], "to_master": []}
        self.kind_counters: dict[tuple[str, str], int] = {}
        self.swap_hold: dict[str, bytes | None] = {"to_slave": None, "to_master": None}
        self.interaction_effects: dict[tuple[str, str], list[dict]] = {}
        self._fault_plan = list(scenario.faults)

        doc = dom.parse_html(scenario.html, base_url=scenario.base_url)
        lists = evaluate_query(doc, scenario.query, scenario.geometry,
                               scenario.threshold)
        annotated = annotate(doc, lists)
        result = split(annotated, session_id=f"sim-{scenario.seed}")
        self.master = _MasterEndpoint(self, result)
        replica = dom.parse_html(
            dom.serialize_html(result.slave, include_identity=True), id_prefix="s")
        alias = {result.master_body_id: replica.body_id}
        self.slave = _SlaveEndpoint(self, result.session_id, replica, alias)

    # -- delivery with fault injection ------------------------------------

    def _match_fault(self, direction: str, kind: str) -> Fault | None:
        count = self.kind_counters.get((direction, kind), 0)
        self.kind_counters[(direction, kind)] = count + 1
        for fault in self._fault_plan:
            if fault.direction != direction or fault.kind != kind:
                continue
            index = fault.index
            if index is None:
                # seeded placement: fire with 1-in-4 odds on eligible messages
                if self.rng.random() < 0.25:
                    self._fault_plan.remove(fault)
                    return fault
                continue
            if index == count:
                self._fault_plan.remove(fault)
                return fault
        return None

    def send(self, direction: str, msg: SyncMessage):
        wire = encode(msg)
        fault = self._match_fault(direction, msg.kind)
        fate = "delivered"
        if fault is not None:
            fate = fault.type + ("ped" if fault.type == "drop" else "d")
        self.transcript.append({
            "t": self.clock, "dir": direction, "kind": msg.kind,
            "seq": msg.seq, "fate": fate, "bytes": len(wire),
        })
        if fault is not None and fault.type == "drop":
            return
        deliveries = [wire]
        if fault is not None and fault.type == "duplicate":
            deliveries.append(wire)
        if fault is not None and fault.type == "swap":
            self.swap_hold[direction] = wire
            return
        for payload in deliveries:
            self._deliver(direction, payload)
            held = self.swap_hold[direction]
            if held is not None:
                self.swap_hold[direction] = None
                self._deliver(direction, held)

    def _deliver(self, direction: str, wire: bytes):
        peer = "slave" if direction == "to_slave" else "master"
        if not self.connected[peer]:
            self.buffers[direction].append(wire)
            return
        endpoint = self.slave if peer == "slave" else self.master
        endpoint.on_message(decode(wire))

    def _flush_buffer(self, direction: str):
        pending, self.buffers[direction] = self.buffers[direction], []
        for wire in pending:
            self._deliver(direction, wire)

    # -- scripted events ----------------------------------------------------

    def apply_master_op(self, op: dict):
        doc = self.master.doc
        kind = op.get("op")
        if kind == "set_attribute":
            doc.set_attribute(op["target"], op["name"], op["value"])
        elif kind == "remove_attribute":
            doc.remove_attribute(op["target"], op["name"])
        elif kind == "set_text":
            target = op["target"]
            texts = [c for c in doc.nodes[target].children
                     if doc.nodes[c].kind == dom.TEXT]
            index = op.get("text_index", 0)
            if index >= len(texts):
                raise ScenarioError(f"{target} has no text child {index}")
            doc.set_text(texts[index], op["value"])
        elif kind == "insert":
            roots = dom.parse_fragment(doc, op["html"])
            if len(roots) != 1:
                raise ScenarioError("insert op html must have one root")
            doc.insert_node(roots[0], op["parent"], op.get("prev"))
        elif kind == "remove":
            doc.remove_node(op["target"])
        elif kind == "move":
            doc.move_node(op["target"], op["parent"], op.get("prev"))
        else:
            raise ScenarioError(f"unknown mutation op {kind!r}")

    def run_event(self, event: dict):
        self.clock = event.get("at", self.clock)
        action = event.get("action")
        if action == "mutate":
            ops = event.get("ops") or [event]
            for op in ops:
                self.apply_master_op(op)
            self.master.flush_changes()
        elif action == "interact":
            record = InteractionRecord(node=event["node"],
                                       event_type=event.get("event", "click"),
                                       detail=event.get("detail", {}))
            key = (record.node, record.event_type)
            self.interaction_effects[key] = event.get("effect", [])
            self.slave.interact(record)
        elif action == "split_request":
            query = query_from_json(event["query"])
            geometry = (geometry_from_json(event["geometry"])
                        if "geometry" in event else self.scenario.geometry)
            self.master.split_with(query, geometry)
        elif action == "disconnect":
            self.connected[event.get("peer", "slave")] = False
        elif action == "connect":
            peer = event.get("peer", "slave")
            self.connected[peer] = True
            self._flush_buffer("to_slave" if peer == "slave" else "to_master")
        else:
            raise ScenarioError(f"unknown event action {action!r}")

    def run(self) -> SimulationResult:
        self.master.hello()
        self.slave.hello()
        self.slave.request_resync()  # bootstrap: adopt text identities
        for event in self.scenario.events:
            self.run_event(event)
        # fence: surface a trailing loss before closing
        self.clock += 1
        self.master.bye()
        for peer, direction in (("slave", "to_slave"), ("master", "to_master")):
            if not self.connected[peer]:
                self.connected[peer] = True
                self._flush_buffer(direction)

        proj = build_projection(self.master.doc)
        replica = self.slave.replica
        converged = projection_matches_document(proj, replica)
        divergence = "" if converged else projection_diff_description(proj, replica)
        failures = self._check_expectations(converged)
        return SimulationResult(converged=converged, divergence=divergence,
                                transcript=self.transcript,
                                master=self.master.doc, slave=replica,
                                expect_failures=failures)

    def _check_expectations(self, converged: bool) -> list[str]:
        expect = self.scenario.expect
        failures = []
        if expect.get("converged", True) != converged:
            failures.append(f"expected converged={expect.get('converged', True)}, "
                            f"got {converged}")
        replica = self.slave.replica
        for nid in expect.get("slave_has", []):
            if not replica.has_node(nid):
                failures.append(f"expected {nid} on slave")
        for nid in expect.get("slave_lacks", []):
            if replica.has_node(nid):
                failures.append(f"expected {nid} absent from slave")
        return failures


def simulate(scenario: Scenario) -> SimulationResult:
    """Run one scenario; deterministic for a fixed scenario (seed included)."""
    return _Simulation(scenario).run()
