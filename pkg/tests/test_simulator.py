"""Simulated sessions: convergence, fault recovery, determinism."""

import json

import pytest

from screensplit import dom
from screensplit.simulator import Scenario, ScenarioError, simulate

PAGE = (
    '<body>'
    '<h1 data-vs-id="title">Demo</h1>'
    '<video data-vs-id="vid"></video>'
    '<div data-vs-id="panel"><p data-vs-id="cap">caption one</p></div>'
    '<button data-vs-id="btn">more</button>'
    '</body>')

MULTIMEDIA_QUERY = {"op": "leaf",
                    "criterion": {"kind": "semantic", "classes": ["multimedia"]}}


def scenario(**overrides) -> Scenario:
    data = {"name": "t", "html": PAGE, "query": MULTIMEDIA_QUERY, "seed": 1}
    data.update(overrides)
    return Scenario.from_json(json.dumps(data))


def test_empty_scenario_replicas_match_initial_split():
    result = simulate(scenario())
    assert result.converged, result.divergence
    assert result.slave.has_node("vid")
    assert not result.slave.has_node("title")
    # transcript: hellos, bootstrap resync + snapshot, bye
    kinds = [t["kind"] for t in result.transcript]
    assert kinds.count("hello") == 2
    assert "resync" in kinds and "changes" in kinds


def test_mutations_mirror_to_slave():
    result = simulate(scenario(events=[
        {"at": 1, "action": "mutate",
         "ops": [{"op": "set_attribute", "target": "vid", "name": "class",
                  "value": "fullscreen"},
                 {"op": "insert", "parent": "vid",
                  "html": '<track data-vs-id="sub">'}]},
        {"at": 2, "action": "mutate",
         "ops": [{"op": "set_attribute", "target": "title", "name": "class",
                  "value": "big"}]},
    ]))
    assert result.passed, result.divergence
    assert result.slave.nodes["vid"].attrs["class"] == "fullscreen"
    assert result.slave.has_node("sub")
    assert not result.slave.has_node("title")


def test_interaction_effect_mirrors_back():
    result = simulate(scenario(events=[
        {"at": 1, "action": "interact", "node": "btn", "event": "click",
         "effect": [{"op": "insert", "parent": "vid",
                     "html": '<source data-vs-id="hd" src="https://h/hd.mp4">'}]},
    ]))
    assert result.passed, result.divergence
    assert result.slave.has_node("hd")
    sent = [t for t in result.transcript if t["kind"] == "interaction"]
    assert len(sent) == 1 and sent[0]["dir"] == "to_master"


def test_dropped_changes_recovers_via_resync():
    events = [{"at": i, "action": "mutate",
               "ops": [{"op": "set_attribute", "target": "vid",
                        "name": "data-step", "value": str(i)}]}
              for i in range(1, 6)]
    result = simulate(scenario(
        events=events,
        faults=[{"type": "drop", "direction": "to_slave", "index": 2}]))
    assert result.converged, result.divergence
    assert result.slave.nodes["vid"].attrs["data-step"] == "5"
    fates = [t["fate"] for t in result.transcript if t["dir"] == "to_slave"]
    assert "dropped" in fates
    assert any(t["kind"] == "resync" for t in result.transcript)


def test_duplicated_changes_is_ignored():
    events = [{"at": i, "action": "mutate",
               "ops": [{"op": "set_attribute", "target": "vid",
                        "name": "data-step", "value": str(i)}]}
              for i in range(1, 4)]
    result = simulate(scenario(
        events=events,
        faults=[{"type": "duplicate", "direction": "to_slave", "index": 1}]))
    assert result.converged, result.divergence


def test_swapped_changes_recovers():
    events = [{"at": i, "action": "mutate",
               "ops": [{"op": "set_attribute", "target": "vid",
                        "name": "data-step", "value": str(i)}]}
              for i in range(1, 5)]
    result = simulate(scenario(
        events=events,
        faults=[{"type": "swap", "direction": "to_slave", "index": 1}]))
    assert result.converged, result.divergence


def test_trailing_drop_detected_at_fence():
    events = [{"at": 1, "action": "mutate",
               "ops": [{"op": "set_attribute", "target": "vid",
                        "name": "data-final", "value": "yes"}]}]
    # bootstrap snapshot is changes #0; the only scripted batch is #1
    result = simulate(scenario(
        events=events,
        faults=[{"type": "drop", "direction": "to_slave", "index": 1}]))
    assert result.converged, result.divergence
    assert result.slave.nodes["vid"].attrs["data-final"] == "yes"


def test_disconnect_buffers_until_reconnect():
    events = [
        {"at": 1, "action": "disconnect", "peer": "slave"},
        {"at": 2, "action": "mutate",
         "ops": [{"op": "set_attribute", "target": "vid", "name": "data-x",
                  "value": "1"}]},
        {"at": 3, "action": "connect", "peer": "slave"},
    ]
    result = simulate(scenario(events=events))
    assert result.converged, result.divergence
    assert result.slave.nodes["vid"].attrs["data-x"] == "1"


def test_split_request_transitions_slave():
    interactive = {"op": "leaf",
                   "criterion": {"kind": "semantic", "classes": ["interactive"]}}
    result = simulate(scenario(events=[
        {"at": 1, "action": "split_request", "query": interactive},
    ]))
    assert result.converged, result.divergence
    assert result.slave.has_node("btn")
    assert not result.slave.has_node("vid")


def test_determinism_same_scenario_same_transcript():
    sc = {"name": "det", "html": PAGE, "query": MULTIMEDIA_QUERY, "seed": 7,
          "events": [
              {"at": 1, "action": "mutate",
               "ops": [{"op": "insert", "parent": "vid",
                        "html": '<track data-vs-id="t1">'}]},
              {"at": 2, "action": "interact", "node": "btn", "event": "click",
               "effect": [{"op": "remove", "target": "t1"}]},
          ],
          "faults": [{"type": "drop", "direction": "to_slave", "index": None}]}
    a = simulate(Scenario.from_json(json.dumps(sc)))
    b = simulate(Scenario.from_json(json.dumps(sc)))
    assert a.transcript == b.transcript
    assert dom.documents_equal(a.slave, b.slave)
    assert a.converged == b.converged


def test_expectation_failures_reported():
    result = simulate(scenario(expect={"slave_has": ["title"]}))
    assert result.converged
    assert not result.passed
    assert any("title" in f for f in result.expect_failures)


def test_malformed_scenarios_rejected():
    with pytest.raises(ScenarioError):
        Scenario.from_json("{not json")
    with pytest.raises(ScenarioError):
        Scenario.from_json(json.dumps({"name": "x", "html": "<p>x</p>"}))
    with pytest.raises(ScenarioError):
        Scenario.from_json(json.dumps(
            {"html": "<p>x</p>", "query": MULTIMEDIA_QUERY,
             "faults": [{"type": "explode"}]}))
