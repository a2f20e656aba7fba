"""JSON net documents, join specs, and DOT export.

One document format covers Petri nets and occurrence nets, discriminated by
the "kind" field. Annotations ride along inline: "qdim" on places, "hdim"
and "map" on transitions, all or none. Complex numbers serialize as
[re, im] pairs of decimal floats; floats round-trip exactly through the
shortest-repr encoding the json module uses.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .annotation import LocalAnnotation, annotation_issues
from .composition import JoinSpec
from .errors import DocumentError, QpnError
from .linalg import QuantumMap, map_from_choi, quantum_map
from .nets import NetSkeleton, OccurrenceNet, PetriNet, Polarity

FORMAT_VERSION = "1"


@dataclass(eq=False)
class NetDocument:
    kind: str  # "petri" | "occurrence"
    net: object  # PetriNet | OccurrenceNet
    annotation: LocalAnnotation | None
    metadata: dict
    format_version: str = FORMAT_VERSION

    @property
    def skeleton(self) -> NetSkeleton:
        return self.net.skeleton

    @property
    def initial_marking(self) -> frozenset:
        return self.net.m0 if self.kind == "petri" else self.net.c0


# ---------------------------------------------------------------- matrices


def matrix_to_json(mat: np.ndarray) -> dict:
    mat = np.asarray(mat, dtype=np.complex128)
    return {
        "rows": int(mat.shape[0]),
        "cols": int(mat.shape[1]),
        "entries": [[float(z.real), float(z.imag)] for z in mat.reshape(-1)],
    }


def matrix_from_json(obj) -> np.ndarray:
    if not isinstance(obj, dict) or not {"rows", "cols", "entries"} <= set(obj):
        raise DocumentError(f"matrix fragment must have rows/cols/entries, got {obj!r}")
    rows, cols = int(obj["rows"]), int(obj["cols"])
    entries = obj["entries"]
    if len(entries) != rows * cols:
        raise DocumentError(f"matrix has {len(entries)} entries, expected {rows * cols}")
    flat = np.empty(rows * cols, dtype=np.complex128)
    for i, pair in enumerate(entries):
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise DocumentError(f"entry {i} is not a [re, im] pair: {pair!r}")
        flat[i] = complex(float(pair[0]), float(pair[1]))
    return flat.reshape(rows, cols)


def map_to_json(m: QuantumMap) -> dict:
    return {
        "in": m.in_dim,
        "out": m.out_dim,
        "kraus": [matrix_to_json(k) for k in m.kraus_list()],
    }


def map_from_json(obj) -> QuantumMap:
    if not isinstance(obj, dict) or "in" not in obj or "out" not in obj:
        raise DocumentError(f"map fragment needs 'in' and 'out': {obj!r}")
    in_dim, out_dim = int(obj["in"]), int(obj["out"])
    if "kraus" in obj:
        mats = [matrix_from_json(k) for k in obj["kraus"]]
        if not mats:
            raise DocumentError("map fragment has an empty Kraus list")
        for k in mats:
            if k.shape != (out_dim, in_dim):
                raise DocumentError(
                    f"Kraus operator of shape {k.shape} does not match {out_dim}x{in_dim}"
                )
        return quantum_map(mats)
    if "choi" in obj:
        return map_from_choi(matrix_from_json(obj["choi"]), in_dim, out_dim)
    raise DocumentError("map fragment needs either 'kraus' or 'choi'")


# ---------------------------------------------------------------- documents


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise DocumentError(message)


def parse_net_document(obj: dict) -> NetDocument:
    _require(isinstance(obj, dict), "net document must be a JSON object")
    kind = obj.get("kind", "petri")
    _require(kind in ("petri", "occurrence"), f"unknown kind {kind!r}")
    version = str(obj.get("format_version", FORMAT_VERSION))
    _require(version == FORMAT_VERSION, f"unsupported format_version {version!r}")
    places_raw = obj.get("places")
    transitions_raw = obj.get("transitions")
    _require(isinstance(places_raw, list), "missing 'places' list")
    _require(isinstance(transitions_raw, list), "missing 'transitions' list")

    qdim = {}
    places = []
    for entry in places_raw:
        _require(isinstance(entry, dict) and "id" in entry, f"bad place entry {entry!r}")
        pid = int(entry["id"])
        places.append(pid)
        if "qdim" in entry:
            qdim[pid] = int(entry["qdim"])

    polarity = {}
    hdim = {}
    event_map = {}
    for entry in transitions_raw:
        _require(isinstance(entry, dict) and "id" in entry, f"bad transition entry {entry!r}")
        tid = int(entry["id"])
        try:
            polarity[tid] = Polarity.coerce(entry.get("pol", "0"))
        except ValueError:
            raise DocumentError(f"transition {tid} has unknown polarity {entry.get('pol')!r}")
        if "hdim" in entry:
            hdim[tid] = int(entry["hdim"])
        if "map" in entry:
            event_map[tid] = map_from_json(entry["map"])

    flow_raw = obj.get("flow", [])
    _require(isinstance(flow_raw, list), "'flow' must be a list of [src, dst] pairs")
    flow = []
    for arc in flow_raw:
        _require(
            isinstance(arc, (list, tuple)) and len(arc) == 2, f"bad flow entry {arc!r}"
        )
        flow.append((int(arc[0]), int(arc[1])))

    m0_raw = obj.get("m0", [])
    _require(isinstance(m0_raw, list), "'m0' must be a list of place ids")
    m0 = frozenset(int(p) for p in m0_raw)

    try:
        skeleton = NetSkeleton(places=places, transitions=polarity, flow=flow)
        if kind == "petri":
            net = PetriNet(skeleton, m0)
        else:
            net = OccurrenceNet(skeleton, c0=m0 if m0_raw else None)
    except QpnError as exc:
        raise DocumentError(f"net structure is invalid: {exc}") from exc

    annotated = bool(qdim or event_map or hdim)
    annotation = None
    if annotated:
        annotation = LocalAnnotation(qdim=qdim, event_map=event_map, hdim=hdim)
        missing_places = [p for p in places if p not in qdim]
        missing_maps = [t for t in polarity if t not in event_map]
        if missing_places or missing_maps:
            raise DocumentError(
                "annotation must cover every node: "
                f"places without qdim {missing_places}, transitions without map {missing_maps}"
            )
    metadata = obj.get("metadata", {})
    _require(isinstance(metadata, dict), "'metadata' must be an object")
    return NetDocument(
        kind=kind, net=net, annotation=annotation, metadata=metadata, format_version=version
    )


def serialize_net_document(doc: NetDocument) -> dict:
    skeleton = doc.skeleton
    ann = doc.annotation
    places = []
    for p in sorted(skeleton.places):
        entry = {"id": p}
        if ann is not None:
            entry["qdim"] = ann.qdim[p]
        places.append(entry)
    transitions = []
    for t in sorted(skeleton.transitions):
        entry = {"id": t, "pol": skeleton.polarity[t].value}
        if ann is not None:
            entry["hdim"] = ann.hdim_of(t)
            entry["map"] = map_to_json(ann.event_map[t])
        transitions.append(entry)
    return {
        "format_version": doc.format_version,
        "kind": doc.kind,
        "places": places,
        "transitions": transitions,
        "flow": [list(arc) for arc in sorted(skeleton.flow)],
        "m0": sorted(doc.initial_marking),
        "metadata": doc.metadata,
    }


def load_net_document(path: str) -> NetDocument:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DocumentError(f"cannot read net document {path}: {exc}") from exc
    return parse_net_document(obj)


def document_annotation_issues(doc: NetDocument, *, check_cptni: bool = True) -> list:
    if doc.annotation is None:
        return []
    return annotation_issues(doc.skeleton, doc.annotation, check_cptni=check_cptni)


# ---------------------------------------------------------------- join specs


def parse_join_spec(obj: dict) -> JoinSpec:
    _require(isinstance(obj, dict), "join spec must be a JSON object")
    pairs = obj.get("map")
    _require(
        isinstance(pairs, list) and pairs,
        "join spec needs a nonempty 'map' list of [negative, positive] pairs",
    )
    pairing = {}
    for arc in pairs:
        _require(
            isinstance(arc, (list, tuple)) and len(arc) == 2, f"bad map entry {arc!r}"
        )
        pairing[int(arc[0])] = int(arc[1])
    enclosing = obj.get("enclosing")
    if enclosing is not None:
        _require(isinstance(enclosing, list), "'enclosing' must be a list of event ids")
        enclosing = frozenset(int(t) for t in enclosing)
    return JoinSpec.of(pairing, enclosing=enclosing)


def load_join_spec(path: str) -> JoinSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DocumentError(f"cannot read join spec {path}: {exc}") from exc
    return parse_join_spec(obj)


# ---------------------------------------------------------------- DOT export


def dot_of_net(skeleton: NetSkeleton, marking=frozenset()) -> str:
    """Conditions as circles, events as boxes with a polarity suffix,
    initially marked conditions filled."""
    lines = ["digraph net {", "  rankdir=LR;"]
    marked = frozenset(marking)
    for p in sorted(skeleton.places):
        style = ', style=filled, fillcolor="gray75"' if p in marked else ""
        lines.append(f'  p{p} [shape=circle, label="{p}"{style}];')
    for t in sorted(skeleton.transitions):
        pol = skeleton.polarity[t].value
        lines.append(f'  t{t} [shape=box, label="{t} {pol}"];')
    for a, b in sorted(skeleton.flow):
        src = f"p{a}" if a in skeleton.places else f"t{a}"
        dst = f"p{b}" if b in skeleton.places else f"t{b}"
        lines.append(f"  {src} -> {dst};")
    lines.append("}")
    return "\n".join(lines)


# ---------------------------------------------------------------- hashing


def content_hash(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()
