"""Acceptance criteria, one test per criterion, each printing a PASS line
with its elapsed time against the stated budget. Run with:

    pytest tests/test_acceptance.py -v -s
"""

import json
import random
import time
from pathlib import Path

from screensplit import dom, mapping
from screensplit.annotation import annotate, validate_annotation
from screensplit.mapping import (DeviceLists, ElementClass, Region,
                                 RegionCriterion, SemanticCriterion,
                                 classify_element, geometry_from_json,
                                 map_region, map_semantic)
from screensplit.cli import main
from screensplit.projection import build_projection, projection_matches_document
from screensplit.simulator import Scenario, simulate
from screensplit.splitter import split

from conftest import (FIXTURES, ScenarioOpGenerator, check_coverage,
                      random_device_lists, random_document)
from test_annotation import _check_properties

OFF_TABLE_TAGS = [
    "span", "em", "b", "i", "u", "strong", "section", "article", "header",
    "footer", "main", "aside", "ul", "ol", "li", "dl", "script", "style",
    "br", "blockquote",
]


def report(name: str, elapsed: float | None = None, budget: float | None = None):
    line = f"PASS: {name}"
    if elapsed is not None:
        line += f" [{elapsed:.2f}s"
        line += f" < {budget:.0f}s budget]" if budget else "]"
    print(line)


def test_classification_table_conformance():
    start = time.perf_counter()
    for _ in range(100):  # well under a second even repeated
        for tag in mapping.INTERACTIVE_TAGS:
            assert classify_element(tag, {}) is ElementClass.INTERACTIVE
        for tag in mapping.MULTIMEDIA_TAGS:
            assert classify_element(tag, {}) is ElementClass.MULTIMEDIA
        for tag in mapping.VISUAL_TAGS:
            assert classify_element(tag, {}) is ElementClass.VISUAL
        for tag in mapping.COMPOSITE_TAGS:
            assert classify_element(tag, {}) is ElementClass.COMPOSITE
        for tag in OFF_TABLE_TAGS:
            assert classify_element(tag, {}) is ElementClass.OTHER
    listed = (len(mapping.INTERACTIVE_TAGS) + len(mapping.MULTIMEDIA_TAGS)
              + len(mapping.VISUAL_TAGS) + len(mapping.COMPOSITE_TAGS))
    elapsed = time.perf_counter() - start
    assert listed == 37 and len(OFF_TABLE_TAGS) == 20
    assert elapsed < 1.0
    report(f"classification table conformance ({listed} listed + 20 off-table tags)",
           elapsed, 1.0)


def test_semantic_split_of_youtube_like_fixture():
    doc = dom.parse_html((FIXTURES / "youtube_like.html").read_bytes())
    lists = map_semantic(doc, SemanticCriterion(frozenset({ElementClass.INTERACTIVE})))
    assert lists.secondary == ["searchform", "searchbox", "searchbtn",
                               "likebtn", "sharebtn", "guidenav", "rec1", "rec2"]
    assert lists.primary == ["logo", "player", "videotitle", "commentshead",
                             "comment1text", "comment2text"]
    annotated = annotate(doc, lists)
    res = split(annotated, session_id="acc")

    fixture_ids = {nid for nid in doc.iter_elements()
                   if not nid.startswith("n")}
    slave_ids = {res.slave.nodes[nid].attrs[dom.IDENTITY_ATTR]
                 for nid in res.slave.iter_elements()
                 if res.slave.nodes[nid].attrs.get(dom.IDENTITY_ATTR)}
    # buttons, anchors and the guide container move; shells that hold them
    # (both-devices containers) come along
    assert slave_ids & fixture_ids == {
        "masthead", "searchform", "searchbox", "searchbtn",
        "content", "playerbox", "controlsrow", "likebtn", "sharebtn",
        "guide", "guidenav", "rec1", "rec2"}
    # the video keeps running on the master, with the comments
    for kept in ("player", "comments", "comment1", "comment2",
                 "comment1text", "comment2text", "commentshead"):
        token = annotated.nodes[kept].attrs["data-device"]
        assert token == "device1", (kept, token)
        assert kept not in slave_ids
    report("semantic split of the YouTube-like fixture (interactive query)")


def test_region_split_of_semantic_video_fixture():
    doc = dom.parse_html((FIXTURES / "semantic_video_like.html").read_bytes())
    geometry = geometry_from_json(
        (FIXTURES / "semantic_video_geometry.json").read_text())
    lists = map_region(doc, RegionCriterion(Region(0, 0, 1280, 480)), geometry)
    assert lists.secondary == ["mainvideo", "photo1", "photo2"]
    assert lists.primary == ["infohead", "infotext", "mapimg", "credits"]
    annotated = annotate(doc, lists)
    res = split(annotated, session_id="acc")

    slave_ids = {res.slave.nodes[nid].attrs[dom.IDENTITY_ATTR]
                 for nid in res.slave.iter_elements()
                 if res.slave.nodes[nid].attrs.get(dom.IDENTITY_ATTR)}
    explicit = {"stage", "mainvideo", "photostrip", "photo1", "photo2",
                "infopane", "infohead", "infotext", "mapbox", "mapimg", "credits"}
    # video and image strip move to the slave, the info pane stays
    assert slave_ids & explicit == {"stage", "mainvideo", "photostrip",
                                    "photo1", "photo2"}
    for kept in ("infopane", "infohead", "infotext", "mapbox", "mapimg", "credits"):
        assert annotated.nodes[kept].attrs["data-device"] == "device1"
    report("region split of the semantic-video-like fixture (geometry sidecar)")


def test_annotation_properties_on_200_random_trees():
    start = time.perf_counter()
    for seed in range(200):
        rng = random.Random(seed)
        doc = random_document(seed, budget=rng.randint(20, 160))
        assert len(doc.nodes) <= 500
        primary, secondary = random_device_lists(rng, doc)
        lists = DeviceLists(primary=primary, secondary=secondary)
        out = annotate(doc, lists)
        assert validate_annotation(out) == []
        _check_properties(doc, primary, secondary, out)
        twice = annotate(out, lists)
        assert dom.documents_equal(out, twice)
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    report("annotation totality/idempotence/input-respect/parent-consistency "
           "on 200 random trees", elapsed, 10.0)


def _fuzz_scenario(seed: int, total_ops: int, fault: dict | None = None) -> Scenario:
    """A full simulator scenario with generated mutation batches."""
    rng = random.Random(seed)
    doc = random_document(seed, budget=rng.randint(20, 60))
    classes = rng.sample(["interactive", "multimedia", "visual"],
                         rng.randint(1, 3))
    query = {"op": "leaf", "criterion": {"kind": "semantic", "classes": classes}}
    html = dom.serialize_html(doc, include_identity=True)

    # shadow what the simulator will build, so ops reference live ids
    shadow_doc = dom.parse_html(html)
    lists = mapping.evaluate_query(shadow_doc, mapping.query_from_json(query))
    shadow = split(annotate(shadow_doc, lists), session_id=f"sim-{seed}").master
    generator = ScenarioOpGenerator(shadow, rng)
    events = generator.event_batches(total_ops)
    data = {"name": f"fuzz-{seed}", "html": html, "query": query,
            "seed": seed, "events": events}
    if fault is not None:
        data["faults"] = [fault]
    return Scenario.from_json(json.dumps(data))


def test_mirroring_convergence_fuzz_100_scenarios():
    start = time.perf_counter()
    passed = 0
    for seed in range(100):
        rng = random.Random(1000 + seed)
        scenario = _fuzz_scenario(seed, total_ops=rng.randint(50, 500))
        result = simulate(scenario)
        assert result.converged, f"seed {seed}: {result.divergence}"
        passed += 1
    elapsed = time.perf_counter() - start
    assert passed == 100
    assert elapsed < 60.0
    report("mirroring convergence fuzz, 100/100 scenarios of up to 500 "
           "mutations through the full simulator", elapsed, 60.0)


def test_fault_recovery_50_single_fault_scenarios():
    start = time.perf_counter()
    passed = 0
    for seed in range(50):
        rng = random.Random(5000 + seed)
        total_ops = rng.randint(30, 120)
        # dry run to learn how many Changes batches flow to the slave
        dry = simulate(_fuzz_scenario(seed, total_ops))
        assert dry.converged
        changes_count = sum(1 for t in dry.transcript
                            if t["dir"] == "to_slave" and t["kind"] == "changes")
        assert changes_count >= 1
        fault = {"type": rng.choice(["drop", "duplicate"]),
                 "direction": "to_slave",
                 "index": rng.randrange(changes_count),
                 "kind": "changes"}
        result = simulate(_fuzz_scenario(seed, total_ops, fault=fault))
        fates = {t["fate"] for t in result.transcript}
        assert fates - {"delivered"}, f"seed {seed}: fault never fired"
        assert result.converged, \
            f"seed {seed} fault {fault}: {result.divergence}"
        passed += 1
    elapsed = time.perf_counter() - start
    assert passed == 50
    report(f"fault recovery, 50/50 single-fault scenarios converge after "
           f"resync", elapsed)


def _fixture_pipelines():
    doc = dom.parse_html((FIXTURES / "youtube_like.html").read_bytes())
    yield "youtube_like/interactive", doc, map_semantic(
        doc, SemanticCriterion(frozenset({ElementClass.INTERACTIVE})))
    doc = dom.parse_html((FIXTURES / "youtube_like.html").read_bytes())
    yield "youtube_like/multimedia", doc, map_semantic(
        doc, SemanticCriterion(frozenset({ElementClass.MULTIMEDIA})))
    doc = dom.parse_html((FIXTURES / "semantic_video_like.html").read_bytes())
    geometry = geometry_from_json(
        (FIXTURES / "semantic_video_geometry.json").read_text())
    yield "semantic_video/region", doc, map_region(
        doc, RegionCriterion(Region(0, 0, 1280, 480)), geometry)


def test_split_coverage_invariant_on_every_fixture():
    for name, doc, lists in _fixture_pipelines():
        annotated = annotate(doc, lists)
        res = split(annotated, session_id="acc")
        check_coverage(annotated, res)
        assert projection_matches_document(build_projection(annotated), res.slave), name
    report("split coverage invariant on every fixture (structural)")


def test_split_determinism_byte_identical(tmp_path):
    jobs = [
        (str(FIXTURES / "youtube_like.html"),
         str(FIXTURES / "interactive_query.json"), None),
        (str(FIXTURES / "semantic_video_like.html"),
         str(FIXTURES / "video_region_query.json"),
         str(FIXTURES / "semantic_video_geometry.json")),
    ]
    for i, (page, query, geometry) in enumerate(jobs):
        outputs = []
        for run in ("first", "second"):
            out = tmp_path / f"{i}-{run}"
            argv = ["split", page, "--query", query, "--session-id", "pinned",
                    "--out", str(out)]
            if geometry:
                argv += ["--geometry", geometry]
            assert main(argv) == 0
            outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        assert outputs[0] == outputs[1], page
        assert set(outputs[0]) == {"master.html", "slave.html", "manifest.json"}
    report("cmd_split byte-identical across two runs on every fixture")
