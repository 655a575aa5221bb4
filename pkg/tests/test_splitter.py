"""Master/slave split construction, coverage invariants, runtime re-split."""

import random

import pytest
from hypothesis import given, settings, strategies as st

from screensplit import dom, protocol
from screensplit.annotation import DEVICE_ATTR, annotate, assignment_of, DeviceAssignment
from screensplit.mapping import (DeviceLists, ElementClass, QueryNode, Region,
                                 RegionCriterion, SemanticCriterion)
from screensplit.projection import build_projection, projection_matches_document
from screensplit.splitter import (SplitError, TransitionResult, split,
                                  runtime_split_request)

from conftest import check_coverage, random_device_lists, random_document

D1 = DeviceAssignment.DEVICE1
D2 = DeviceAssignment.DEVICE2
BOTH = DeviceAssignment.BOTH


def annotated_fixture():
    doc = dom.parse_html(
        '<html><head><title>T</title>'
        '<link rel="stylesheet" href="https://h/app/site.css"></head>'
        '<body><p data-vs-id="intro">text</p>'
        '<video data-vs-id="vid" src="https://h/app/clip.mp4"></video>'
        '<script data-vs-id="logic">state()</script></body></html>')
    return annotate(doc, DeviceLists(primary=["intro"], secondary=["vid"]))


def slave_element_ids(slave):
    ids = set()
    for nid in slave.iter_elements():
        token = slave.nodes[nid].attrs.get(dom.IDENTITY_ATTR)
        if token:
            ids.add(token)
    return ids


class TestSplit:
    def test_master_keeps_everything_hides_secondary(self):
        res = split(annotated_fixture(), session_id="s")
        master = res.master
        assert master.has_node("intro") and master.has_node("vid")
        style_texts = [master.text_content(nid) for nid in master.iter_elements()
                       if master.nodes[nid].tag == "style"]
        assert any('[data-device="device2"]' in t and "display:none" in t
                   for t in style_texts)

    def test_slave_holds_secondary_without_scripts(self):
        res = split(annotated_fixture(), session_id="s")
        slave = res.slave
        assert slave.has_node("vid")
        assert not slave.has_node("intro")
        # only the injected runtime references may be script elements
        for nid in slave.iter_elements():
            node = slave.nodes[nid]
            if node.tag == "script":
                assert node.attrs.get("id") in ("vs-config", "vs-runtime")

    def test_inline_handlers_stripped_from_slave(self):
        doc = dom.parse_html(
            '<body><video data-vs-id="v" onplay="track()"></video></body>')
        res = split(annotate(doc, DeviceLists(secondary=["v"])), session_id="s")
        assert "onplay" not in res.slave.nodes["v"].attrs

    def test_all_both_mirrors_entire_body(self):
        doc = dom.parse_html(
            '<body><div data-vs-id="a"><p data-vs-id="b">x</p></div></body>')
        annotated = annotate(doc, DeviceLists())  # everything dev1&dev2
        res = split(annotated, session_id="s")
        assert res.slave.has_node("a") and res.slave.has_node("b")
        assert res.manifest["hidden_count"] == 0
        proj = build_projection(annotated)
        assert projection_matches_document(proj, res.slave)

    def test_relative_urls_absolutized(self):
        doc = dom.parse_html(
            '<body><video data-vs-id="v" src="clip.mp4" poster="p.jpg"></video>'
            '<img data-vs-id="i" srcset="a.png 1x, b.png 2x"></body>',
            base_url="http://h/app/")
        annotated = annotate(doc, DeviceLists(secondary=["v", "i"]))
        res = split(annotated, session_id="s")
        assert res.slave.nodes["v"].attrs["src"] == "http://h/app/clip.mp4"
        assert res.slave.nodes["v"].attrs["poster"] == "http://h/app/p.jpg"
        assert res.slave.nodes["i"].attrs["srcset"] == \
            "http://h/app/a.png 1x, http://h/app/b.png 2x"
        base = [res.slave.nodes[n] for n in res.slave.iter_elements()
                if res.slave.nodes[n].tag == "base"]
        assert base and base[0].attrs["href"] == "http://h/app/"

    def test_relative_url_without_base_rejected(self):
        doc = dom.parse_html('<body><video data-vs-id="v" src="clip.mp4"></video></body>')
        annotated = annotate(doc, DeviceLists(secondary=["v"]))
        with pytest.raises(SplitError, match="clip.mp4"):
            split(annotated, session_id="s")

    def test_fragment_href_is_not_relative(self):
        doc = dom.parse_html('<body><a data-vs-id="x" href="#top">x</a></body>')
        annotated = annotate(doc, DeviceLists(secondary=["x"]))
        split(annotated, session_id="s")  # no error

    def test_unannotated_input_rejected(self):
        doc = dom.parse_html("<body><p>x</p></body>")
        with pytest.raises(SplitError, match="not fully annotated"):
            split(doc, session_id="s")

    def test_master_annotated_input_untouched(self):
        annotated = annotated_fixture()
        before = dom.serialize_html(annotated, include_identity=True)
        split(annotated, session_id="s")
        assert dom.serialize_html(annotated, include_identity=True) == before

    def test_config_elements_in_both(self):
        res = split(annotated_fixture(), hub_url="ws://hub:9/sync", session_id="sess9")
        for doc, role in ((res.master, "master"), (res.slave, "slave")):
            configs = [doc.text_content(nid) for nid in doc.iter_elements()
                       if doc.nodes[nid].attrs.get("id") == "vs-config"]
            assert len(configs) == 1
            assert f'"role":"{role}"' in configs[0]
            assert '"session":"sess9"' in configs[0]
            assert '"hub":"ws://hub:9/sync"' in configs[0]

    def test_deterministic_given_session_id(self):
        a = split(annotated_fixture(), session_id="fixed")
        b = split(annotated_fixture(), session_id="fixed")
        assert dom.serialize_html(a.master, True) == dom.serialize_html(b.master, True)
        assert dom.serialize_html(a.slave, True) == dom.serialize_html(b.slave, True)

    def test_fresh_session_id_generated(self):
        a = split(annotated_fixture())
        b = split(annotated_fixture())
        assert a.session_id and a.session_id != b.session_id


class TestCoverageInvariant:
    def test_fixture(self):
        annotated = annotated_fixture()
        check_coverage(annotated, split(annotated, session_id="s"))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10**9))
    def test_random_documents_and_lists(self, seed):
        doc = random_document(seed)
        rng = random.Random(seed)
        primary, secondary = random_device_lists(rng, doc)
        annotated = annotate(doc, DeviceLists(primary=primary, secondary=secondary))
        res = split(annotated, session_id="s")
        check_coverage(annotated, res)
        assert projection_matches_document(build_projection(annotated), res.slave)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10**9))
    def test_slave_round_trips_through_html(self, seed):
        # the served slave.html must reparse into the same structure
        doc = random_document(seed)
        rng = random.Random(seed)
        primary, secondary = random_device_lists(rng, doc)
        annotated = annotate(doc, DeviceLists(primary=primary, secondary=secondary))
        res = split(annotated, session_id="s")
        again = dom.parse_html(dom.serialize_html(res.slave, include_identity=True))
        assert dom.documents_equal(res.slave, again)


class TestRuntimeSplitRequest:
    def region_query(self, x, y, w, h):
        return QueryNode(op="leaf", criterion=RegionCriterion(Region(x, y, w, h)))

    def make_session(self):
        doc = dom.parse_html(
            '<body>'
            '<video data-vs-id="vid"></video>'
            '<div data-vs-id="gallery"><img data-vs-id="pic"></div>'
            '<p data-vs-id="info">details</p>'
            '</body>')
        geometry = {
            "vid": Region(0, 0, 400, 300),
            "gallery": Region(0, 300, 400, 100),
            "pic": Region(0, 300, 400, 100),
            "info": Region(0, 400, 400, 200),
        }
        first = runtime_split_request(doc, self.region_query(0, 0, 400, 300),
                                      geometry, session_id="s")
        return first.split, geometry

    def test_superset_region_only_adds(self):
        first, geometry = self.make_session()
        result = runtime_split_request(first.master,
                                       self.region_query(0, 0, 400, 400),
                                       geometry, session_id="s")
        kinds = {rec.type for rec in result.slave_changes
                 if rec.type in (dom.CHILD_ADDED, dom.CHILD_REMOVED, dom.REPARENTED)}
        assert kinds == {dom.CHILD_ADDED}
        added = {rec.node for rec in result.slave_changes
                 if rec.type == dom.CHILD_ADDED}
        assert "gallery" in added and "vid" not in added

    def test_identical_query_is_fixed_point(self):
        first, geometry = self.make_session()
        result = runtime_split_request(first.master,
                                       self.region_query(0, 0, 400, 300),
                                       geometry, session_id="s")
        assert result.slave_changes == []
        assert result.master_annotation_changes == []

    def test_empty_selection_empties_slave(self):
        first, geometry = self.make_session()
        result = runtime_split_request(first.master, self.region_query(0, 0, 0, 0),
                                       geometry, session_id="s")
        removed = {rec.node for rec in result.slave_changes
                   if rec.type == dom.CHILD_REMOVED}
        assert "vid" in removed
        assert not any(rec.type == dom.CHILD_ADDED for rec in result.slave_changes)

    def test_transitions_apply_cleanly_to_old_slave(self):
        first, geometry = self.make_session()
        replica = first.slave.clone()
        result = runtime_split_request(first.master,
                                       self.region_query(0, 0, 400, 400),
                                       geometry, session_id="s")
        protocol.apply_changes(
            replica, result.slave_changes,
            root_alias={result.split.master_body_id: first.slave_body_id})
        proj = build_projection(result.split.master)
        assert projection_matches_document(proj, replica)

    def test_master_annotation_changes_report_flips(self):
        first, geometry = self.make_session()
        result = runtime_split_request(first.master,
                                       self.region_query(0, 400, 400, 200),
                                       geometry, session_id="s")
        flips = {c["node"]: c["value"] for c in result.master_annotation_changes}
        assert flips.get("vid") == "device1"
        assert flips.get("info") == "device2"
