"""Command-line surface: validate, unfold, check, eval, compose, join, export-dot.

Exit codes are uniform across commands: 0 pass/success, 1 fail, 2
inconclusive (an enumeration cap was hit before a verdict), 3 input error.
Reports and documents go to stdout as JSON; reports embed the sha256 of each
input file, so identical inputs produce byte-identical reports up to the
timings field.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from .annotation import induced_global
from .composition import JoinError, NotCertified, drop_preserving_join, parallel_compose
from .documents import (
    NetDocument,
    content_hash,
    document_annotation_issues,
    dot_of_net,
    load_join_spec,
    load_net_document,
    map_to_json,
    matrix_to_json,
    serialize_net_document,
)
from .errors import QpnError
from .nets import OccurrenceNet, PetriNet, validate_occurrence_net
from .unfolding import UnfoldLimit, lift_annotation, unfold, validate_branching_process
from .verification import CheckBounds, certify_qpn, global_drop_oracle

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INCONCLUSIVE = 2
EXIT_INPUT_ERROR = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # Usage problems are input errors under the exit-code contract.
        self.exit(EXIT_INPUT_ERROR, f"{self.prog}: error: {message}\n")


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _inputs(*paths) -> list:
    return [{"path": p, "sha256": content_hash(p)} for p in paths]


def _marking(text: str) -> frozenset:
    text = text.strip()
    if not text:
        return frozenset()
    try:
        return frozenset(int(tok) for tok in text.split(","))
    except ValueError as exc:
        raise QpnError(f"marking must be comma-separated ids, got {text!r}") from exc


def _layout_json(layout) -> list:
    return [[list(fid) if isinstance(fid, tuple) else fid, dim] for fid, dim in layout.factors]


# ---------------------------------------------------------------- commands


def cmd_validate(args) -> int:
    started = time.perf_counter()
    doc = load_net_document(args.file)
    clauses = []
    if doc.kind == "occurrence":
        report = validate_occurrence_net(doc.skeleton, doc.net.c0)
        clauses = [
            {"name": c.name, "verdict": c.verdict, "witness": _plain(c.witness)}
            for c in report.clauses
        ]
        structure_ok = report.ok
    else:
        structure_ok = True  # bipartite structure and marking were checked on load
    issues = document_annotation_issues(doc, check_cptni=True)
    ok = structure_ok and not issues
    _emit(
        {
            "command": "validate",
            "inputs": _inputs(args.file),
            "verdicts": {
                "structure": structure_ok,
                "annotation": not issues,
                "valid": ok,
            },
            "witnesses": {"clauses": clauses, "annotation_issues": issues},
            "timings": {"seconds": time.perf_counter() - started},
        }
    )
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_unfold(args) -> int:
    doc = load_net_document(args.file)
    if doc.kind != "petri":
        raise QpnError("unfold expects a Petri net document (kind 'petri')")
    bp = unfold(doc.net, UnfoldLimit(max_events=args.max_events, max_depth=args.depth))
    annotation = None
    if doc.annotation is not None:
        annotation = lift_annotation(bp, doc.annotation)
    prefix = NetDocument(
        kind="occurrence",
        net=bp.occ,
        annotation=annotation,
        metadata={
            "unfolded_from": content_hash(args.file),
            "complete": bp.complete,
            "valid_branching_process": validate_branching_process(doc.net, bp).ok,
            "place_labels": {str(c): p for c, p in sorted(bp.place_label.items())},
            "event_labels": {str(e): t for e, t in sorted(bp.event_label.items())},
        },
    )
    if args.dot:
        with open(args.dot, "w", encoding="utf-8") as fh:
            fh.write(dot_of_net(bp.occ.skeleton, bp.occ.c0))
    _emit(serialize_net_document(prefix))
    return EXIT_PASS


def _require_annotation(doc: NetDocument):
    if doc.annotation is None:
        raise QpnError("this command needs an annotated net (qdim/map on every node)")
    return doc.annotation


def cmd_check(args) -> int:
    started = time.perf_counter()
    doc = load_net_document(args.file)
    ann = _require_annotation(doc)
    bounds = CheckBounds(
        max_states=args.max_configs,
        max_family_size=args.max_family,
    )
    verdicts = {}
    witnesses = {}
    codes = []

    if args.mode in ("local", "both"):
        cert = certify_qpn(doc.net, ann, bounds=bounds, tol=args.tol)
        if args.workers > 1:
            from .verification import check_local_drop

            drop = check_local_drop(
                doc.net, ann, bounds=bounds, tol=args.tol, workers=args.workers
            )
        else:
            drop = cert.drop
        verdicts["obliviousness"] = cert.obliviousness.passed
        verdicts["drop"] = drop.verdict
        verdicts["race_free"] = cert.race_free
        verdicts["certified"] = cert.certified and drop.verdict == "pass"
        witnesses["obliviousness"] = [str(w) for w in cert.obliviousness.witnesses]
        witnesses["drop"] = [
            {
                "state": list(e.state),
                "cluster": list(e.cluster_events),
                "min_eigenvalue": e.min_eigenvalue,
            }
            for e in drop.failures
        ]
        if not cert.obliviousness.passed or drop.verdict == "fail":
            codes.append(EXIT_FAIL)
        elif drop.verdict == "inconclusive":
            codes.append(EXIT_INCONCLUSIVE)
        else:
            codes.append(EXIT_PASS)

    if args.mode in ("oracle", "both"):
        if doc.kind == "occurrence":
            occ, oracle_ann, complete = doc.net, ann, True
        else:
            bp = unfold(
                doc.net,
                UnfoldLimit(max_events=args.unfold_events, max_depth=args.unfold_depth),
            )
            occ, oracle_ann, complete = bp.occ, lift_annotation(bp, ann), bp.complete
        oracle = global_drop_oracle(occ, oracle_ann, bounds=bounds, tol=args.tol)
        verdict = oracle.verdict
        if verdict == "pass" and not complete:
            verdict = "inconclusive"
        verdicts["oracle"] = verdict
        verdicts["oracle_prefix_complete"] = complete
        witnesses["oracle"] = [
            {
                "configuration": list(f.config),
                "family": [list(y) for y in f.family],
                "min_eigenvalue": f.min_eigenvalue,
            }
            for f in oracle.failures
        ]
        codes.append(
            {"pass": EXIT_PASS, "fail": EXIT_FAIL, "inconclusive": EXIT_INCONCLUSIVE}[verdict]
        )

    if args.mode == "both":
        verdicts["agreement"] = verdicts["drop"] == verdicts["oracle"]

    _emit(
        {
            "command": "check",
            "inputs": _inputs(args.file),
            "mode": args.mode,
            "bounds": {
                "max_configs": args.max_configs,
                "max_family": args.max_family,
            },
            "tol": args.tol,
            "verdicts": verdicts,
            "witnesses": witnesses,
            "timings": {"seconds": time.perf_counter() - started},
        }
    )
    return max(codes)


def cmd_eval(args) -> int:
    doc = load_net_document(args.file)
    ann = _require_annotation(doc)
    if doc.kind != "occurrence":
        raise QpnError("eval expects an occurrence net; unfold the Petri net first")
    op = induced_global(doc.net, ann, _marking(args.source), _marking(args.target))
    _emit(
        {
            "command": "eval",
            "inputs": _inputs(args.file),
            "from": sorted(_marking(args.source)),
            "to": sorted(_marking(args.target)),
            "in_layout": _layout_json(op.in_layout),
            "out_layout": _layout_json(op.out_layout),
            "choi": matrix_to_json(op.map.choi),
            "map": map_to_json(op.map),
        }
    )
    return EXIT_PASS


def cmd_compose(args) -> int:
    doc1 = load_net_document(args.files[0])
    doc2 = load_net_document(args.files[1])
    for doc, path in ((doc1, args.files[0]), (doc2, args.files[1])):
        if doc.kind != "petri":
            raise QpnError(f"compose expects Petri net documents, {path} is {doc.kind}")
        _require_annotation(doc)
    try:
        result = parallel_compose(
            doc1.net,
            doc1.annotation,
            doc2.net,
            doc2.annotation,
            tol=args.tol,
            paranoid=args.paranoid,
        )
    except NotCertified as exc:
        _emit({"command": "compose", "error": str(exc)})
        return EXIT_FAIL
    metadata = {
        "composed_from": [content_hash(p) for p in args.files],
        "offset": result.offset,
    }
    if result.recertification is not None:
        metadata["recertified"] = result.recertification.certified
    _emit(
        serialize_net_document(
            NetDocument(kind="petri", net=result.net, annotation=result.ann, metadata=metadata)
        )
    )
    return EXIT_PASS


def cmd_join(args) -> int:
    doc = load_net_document(args.file)
    ann = _require_annotation(doc)
    if doc.kind != "petri":
        raise QpnError("join expects a Petri net document")
    spec = load_join_spec(args.spec)
    try:
        result = drop_preserving_join(doc.net, ann, spec, tol=args.tol)
    except (JoinError, NotCertified) as exc:
        _emit({"command": "join", "error": str(exc)})
        return EXIT_FAIL
    metadata = {
        "joined_from": content_hash(args.file),
        "joined_events": [list(triple) for triple in result.joined_events],
        "race_free_after": result.race_free_after,
        "drop_after": result.drop_after.verdict if result.drop_after else None,
        "obliviousness_after": (
            not result.obliviousness_after.witnesses if result.obliviousness_after else None
        ),
    }
    _emit(
        serialize_net_document(
            NetDocument(kind="petri", net=result.net, annotation=result.ann, metadata=metadata)
        )
    )
    return EXIT_PASS


def cmd_export_dot(args) -> int:
    doc = load_net_document(args.file)
    text = dot_of_net(doc.skeleton, doc.initial_marking)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text + "\n")
    return EXIT_PASS


def _plain(value):
    if isinstance(value, (frozenset, set, tuple)):
        return sorted(value) if not isinstance(value, tuple) else list(value)
    return value


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qpn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="structural and annotation checks")
    p.add_argument("file")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("unfold", help="bounded branching-process prefix")
    p.add_argument("file")
    p.add_argument("--depth", type=int, default=16)
    p.add_argument("--max-events", type=int, default=64)
    p.add_argument("--dot", help="also write the prefix as a DOT file")
    p.set_defaults(fn=cmd_unfold)

    p = sub.add_parser("check", help="obliviousness and drop-condition checks")
    p.add_argument("file")
    p.add_argument("--mode", choices=("local", "oracle", "both"), default="local")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-configs", type=int, default=10_000)
    p.add_argument("--max-family", type=int, default=2)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--unfold-depth", type=int, default=12)
    p.add_argument("--unfold-events", type=int, default=64)
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("eval", help="global operator of a marking interval")
    p.add_argument("file")
    p.add_argument("--from", dest="source", required=True, help="comma-separated ids")
    p.add_argument("--to", dest="target", required=True, help="comma-separated ids")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("compose", help="parallel composition of two certified nets")
    p.add_argument("--parallel", dest="files", nargs=2, required=True, metavar=("A", "B"))
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--paranoid", action="store_true", help="re-certify the composite")
    p.set_defaults(fn=cmd_compose)

    p = sub.add_parser("join", help="drop-preserving join along a spec")
    p.add_argument("file")
    p.add_argument("--spec", required=True)
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(fn=cmd_join)

    p = sub.add_parser("export-dot", help="DOT rendering of a net document")
    p.add_argument("file")
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_export_dot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code = args.fn(args)
    except QpnError as exc:
        _emit({"command": args.command, "error": str(exc)})
        return EXIT_INPUT_ERROR
    return code


if __name__ == "__main__":
    sys.exit(main())
