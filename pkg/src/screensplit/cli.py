"""Command line entry point tying the pipeline together.

The same pipeline serves both uses: pre-processing a page offline into the
master/slave pair, and running the live hub that relays the mirroring
session (and re-splits on user queries at runtime).
"""

from __future__ import annotations

import argparse
import errno
import json
import logging
import sys
from pathlib import Path

from . import dom
from .annotation import annotate
from .mapping import (ElementClass, QueryError, QueryNode, classify_element,
                      evaluate_query, geometry_from_json, query_from_json,
                      semantic_links)
from .simulator import Scenario, ScenarioError, simulate
from .splitter import SplitError, split

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_UNREADABLE = 2
EXIT_NEEDS_GEOMETRY = 3
EXIT_BAD_ANNOTATION = 4
EXIT_PORT_BUSY = 5

log = logging.getLogger("screensplit")


def _read_file(path: str, code: int = EXIT_UNREADABLE) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise SystemExit(_fail(code, f"cannot read {path}: {exc}"))


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _query_has_region(query: QueryNode) -> bool:
    if query.op == "leaf":
        from .mapping import RegionCriterion
        return isinstance(query.criterion, RegionCriterion)
    return any(_query_has_region(c) for c in query.children)


def cmd_classify(args) -> int:
    try:
        doc = dom.parse_html(_read_file(args.input), base_url=args.base_url)
    except UnicodeDecodeError as exc:
        return _fail(EXIT_UNREADABLE, f"input is not UTF-8: {exc}")
    links = {}
    for referrer, referee in semantic_links(doc):
        links.setdefault(referrer, []).append(referee)

    def label(doc, nid):
        node = doc.nodes[nid]
        html_id = node.attrs.get("id") or node.attrs.get(dom.IDENTITY_ATTR)
        return f"{node.tag}#{html_id}" if html_id else node.tag

    body = doc.body_id
    rows = []
    for nid in doc.iter_subtree(body):
        node = doc.nodes[nid]
        if node.kind != dom.ELEMENT or nid == body:
            continue
        cls = classify_element(node.tag, node.attrs)
        flags = []
        table_class = classify_element(node.tag, {})
        if cls is ElementClass.INTERACTIVE and table_class is not ElementClass.INTERACTIVE:
            flags.append("role-change->interactive")
        for referee in links.get(nid, []):
            flags.append(f"linked->{label(doc, referee)}")
        rows.append((label(doc, nid), cls.value, " ".join(flags)))
    width = max((len(r[0]) for r in rows), default=0)
    for name, cls, flags in rows:
        line = f"{name:<{width}}  {cls:<11}"
        print(f"{line}  {flags}".rstrip())
    return EXIT_OK


def _load_query(path: str) -> QueryNode:
    raw = _read_file(path)
    try:
        return query_from_json(raw.decode("utf-8"))
    except (UnicodeDecodeError, QueryError) as exc:
        raise SystemExit(_fail(EXIT_UNREADABLE, f"bad query {path}: {exc}"))


def _run_split(args):
    doc = dom.parse_html(_read_file(args.input), base_url=args.base_url)
    query = _load_query(args.query)
    geometry = {}
    if args.geometry:
        try:
            geometry = geometry_from_json(_read_file(args.geometry).decode("utf-8"))
        except (ValueError, KeyError) as exc:
            raise SystemExit(_fail(EXIT_UNREADABLE, f"bad geometry file: {exc}"))
    elif _query_has_region(query):
        raise SystemExit(_fail(
            EXIT_NEEDS_GEOMETRY,
            "query has region criteria; provide --geometry with element boxes"))
    try:
        lists = evaluate_query(doc, query, geometry, args.region_threshold)
        annotated = annotate(doc, lists)
        return split(annotated,
                     runtime_master_url=args.runtime_master_url,
                     runtime_slave_url=args.runtime_slave_url,
                     hub_url=args.hub_url,
                     session_id=args.session_id)
    except QueryError as exc:
        raise SystemExit(_fail(EXIT_UNREADABLE, f"bad query: {exc}"))
    except SplitError as exc:
        raise SystemExit(_fail(EXIT_BAD_ANNOTATION, str(exc)))


def cmd_split(args) -> int:
    result = _run_split(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "master.html").write_text(
        dom.serialize_html(result.master, include_identity=True), encoding="utf-8")
    (out / "slave.html").write_text(
        dom.serialize_html(result.slave, include_identity=True), encoding="utf-8")
    manifest = {"session": result.session_id, **result.manifest,
                "master_body_id": result.master_body_id,
                "slave_body_id": result.slave_body_id}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n",
                                       encoding="utf-8")
    print(f"wrote master.html, slave.html, manifest.json to {out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .hub import create_app

    if args.dir:
        artifact_dir = Path(args.dir)
        if not (artifact_dir / "master.html").is_file():
            return _fail(EXIT_UNREADABLE, f"{artifact_dir} has no master.html")
    else:
        if not args.input or not args.query:
            return _fail(EXIT_UNREADABLE,
                         "serve needs --dir or an input file with --query")
        result = _run_split(args)
        artifact_dir = Path(args.out or ".screensplit-serve")
        artifact_dir.mkdir(parents=True, exist_ok=True)
        (artifact_dir / "master.html").write_text(
            dom.serialize_html(result.master, include_identity=True), "utf-8")
        (artifact_dir / "slave.html").write_text(
            dom.serialize_html(result.slave, include_identity=True), "utf-8")
    app = create_app(artifact_dir=artifact_dir, runtime_dir=args.runtime_dir,
                     region_threshold=args.region_threshold)
    # uvicorn exits with its own code on a failed bind; probe first so a
    # busy port is reported distinctly
    import socket

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((args.host, args.port))
    except OSError as exc:
        if exc.errno == errno.EADDRINUSE:
            return _fail(EXIT_PORT_BUSY, f"port {args.port} is busy")
        raise
    finally:
        probe.close()
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def cmd_simulate(args) -> int:
    raw = _read_file(args.scenario)

    def load_fixture(name: str) -> str:
        path = Path(args.scenario).parent / name
        return path.read_text(encoding="utf-8")

    try:
        scenario = Scenario.from_json(raw.decode("utf-8"), html_loader=load_fixture)
    except (ScenarioError, UnicodeDecodeError, OSError) as exc:
        return _fail(EXIT_UNREADABLE, f"bad scenario: {exc}")
    try:
        result = simulate(scenario)
    except ScenarioError as exc:
        return _fail(EXIT_UNREADABLE, f"bad scenario: {exc}")
    if args.transcript:
        Path(args.transcript).write_text(result.transcript_json() + "\n", "utf-8")
    status = "PASS" if result.passed else "FAIL"
    detail = "" if result.passed else f" ({result.divergence or '; '.join(result.expect_failures)})"
    print(f"{status}: {scenario.name} — {len(result.transcript)} messages{detail}")
    return EXIT_OK if result.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="screensplit",
        description="Refactor a single-screen HTML app into a synchronized "
                    "master/slave pair for multiscreen use.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="report element classes and links")
    p.add_argument("input")
    p.add_argument("--base-url")
    p.set_defaults(func=cmd_classify)

    def add_split_options(p, need_query=True):
        p.add_argument("--query", required=need_query,
                       help="mapping query JSON file")
        p.add_argument("--geometry", help="geometry sidecar JSON file")
        p.add_argument("--base-url")
        p.add_argument("--region-threshold", type=float, default=0.5)
        p.add_argument("--session-id")
        p.add_argument("--hub-url", default="ws://localhost:8765/sync")
        p.add_argument("--runtime-master-url", default="/runtime/master.js")
        p.add_argument("--runtime-slave-url", default="/runtime/slave.js")

    p = sub.add_parser("split", help="write master.html/slave.html/manifest.json")
    p.add_argument("input")
    add_split_options(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("serve", help="serve artifacts, runtime, and /sync relay")
    p.add_argument("input", nargs="?")
    p.add_argument("--dir", help="directory with previously split artifacts")
    add_split_options(p, need_query=False)
    p.add_argument("--out", help="artifact output dir when splitting on the fly")
    p.add_argument("--runtime-dir", help="directory with master.js/slave.js")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("simulate", help="run a scripted session, print PASS/FAIL")
    p.add_argument("scenario")
    p.add_argument("--transcript", help="write the message transcript JSON here")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
