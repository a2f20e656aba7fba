"""Local quantum annotations and the global operator they induce.

An annotation assigns a space dimension to every condition, an auxiliary
H dimension to every non-neutral event, and a quantum map to every event.
The map of an event consumes the spaces of its pre-conditions (plus its H
space when the event is negative) and produces the spaces of its
post-conditions (plus its H space when positive), with factors in canonical
ascending order.

The operator induced on a marking interval is evaluated by scheduling the
interval's events into waves (one wave per causal depth), tensoring the maps
of a wave with identities on everything untouched, and composing the waves.
Every wave boundary carries an explicit factor permutation from the canonical
layout to the wave's grouped layout and back, so results are bit-stable
instead of "up to an implicit permutation".
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DimensionMismatch, IllTypedAnnotation, NotReachable
from .linalg import (
    FactorLayout,
    QuantumMap,
    factor_key,
    identity_map,
    relayout_kraus,
    tensor,
    tensor_all,
)
from .nets import MarkingInterval, NetSkeleton, OccurrenceNet, Polarity, interval, restrict


@dataclass(eq=False)
class LocalAnnotation:
    """Spaces for conditions, H spaces and quantum maps for events."""

    qdim: dict
    event_map: dict
    hdim: dict

    def hdim_of(self, t: int) -> int:
        return int(self.hdim.get(t, 1))


def event_input_layout(skeleton: NetSkeleton, ann: LocalAnnotation, t: int) -> FactorLayout:
    pairs = [(c, ann.qdim[c]) for c in sorted(skeleton.pre(t))]
    if skeleton.polarity[t] == Polarity.NEGATIVE:
        pairs.append((("hin", t), ann.hdim_of(t)))
    return FactorLayout.of(pairs)


def event_output_layout(skeleton: NetSkeleton, ann: LocalAnnotation, t: int) -> FactorLayout:
    pairs = [(c, ann.qdim[c]) for c in sorted(skeleton.post(t))]
    if skeleton.polarity[t] == Polarity.POSITIVE:
        pairs.append((("hout", t), ann.hdim_of(t)))
    return FactorLayout.of(pairs)


def annotation_issues(
    skeleton: NetSkeleton,
    ann: LocalAnnotation,
    *,
    check_cptni: bool = False,
    tol: float | None = None,
) -> list:
    """Human-readable list of typing problems; empty when well typed."""
    issues = []
    for c in sorted(skeleton.places):
        dim = ann.qdim.get(c)
        if dim is None:
            issues.append(f"condition {c} has no space dimension")
        elif not isinstance(dim, int) or dim < 1:
            issues.append(f"condition {c} has invalid dimension {dim!r}")
    for t in sorted(skeleton.transitions):
        h = ann.hdim.get(t, 1)
        if not isinstance(h, int) or h < 1:
            issues.append(f"event {t} has invalid H dimension {h!r}")
            continue
        if skeleton.polarity[t] == Polarity.NEUTRAL and h != 1:
            issues.append(f"neutral event {t} must have H dimension 1, got {h}")
        m = ann.event_map.get(t)
        if m is None:
            issues.append(f"event {t} has no quantum map")
            continue
        try:
            want_in = event_input_layout(skeleton, ann, t).total_dim
            want_out = event_output_layout(skeleton, ann, t).total_dim
        except KeyError:
            continue  # missing condition dims already reported
        if (m.in_dim, m.out_dim) != (want_in, want_out):
            issues.append(
                f"event {t} map has signature {m.in_dim}->{m.out_dim}, "
                f"expected {want_in}->{want_out}"
            )
            continue
        if check_cptni:
            from .linalg import is_cptni

            verdict = is_cptni(m, tol)
            if not verdict.cp:
                issues.append(f"event {t} map is not completely positive")
            if not verdict.tni:
                issues.append(f"event {t} map increases trace")
    return issues


def require_well_typed(skeleton: NetSkeleton, ann: LocalAnnotation) -> None:
    issues = annotation_issues(skeleton, ann)
    if issues:
        raise IllTypedAnnotation("; ".join(issues))


def space_of_marking(ann: LocalAnnotation, marking: Iterable) -> FactorLayout:
    """Canonical (ascending id) layout of the spaces of a marking's conditions."""
    pairs = []
    for c in sorted(set(marking)):
        if c not in ann.qdim:
            raise IllTypedAnnotation(f"condition {c} has no space dimension")
        pairs.append((c, ann.qdim[c]))
    return FactorLayout.of(pairs)


# ---------------------------------------------------------------- layer graphs


@dataclass(frozen=True)
class LayerVertex:
    kind: str  # "cond" | "event" | "hin" | "hout"
    ref: int
    dim: int


@dataclass(eq=False)
class LayerGraph:
    """Wave schedule of a marking interval plus the layouts between waves.

    `layouts[i]` is the canonical layout entering wave i; the last entry is
    the layout after the final wave. The domain of the whole diagram is
    `layouts[0]` (marking spaces followed by the input H slots of negative
    events), its codomain `layouts[-1]` (final marking spaces followed by the
    output H slots of positive events).
    """

    skeleton: NetSkeleton
    ann: LocalAnnotation
    from_marking: frozenset
    to_marking: frozenset
    waves: tuple
    layouts: tuple

    def layers(self) -> tuple:
        """Explicit alternating layers: wire layers (even) and event layers (odd)."""
        out = []
        for i, lay in enumerate(self.layouts):
            wires = tuple(_vertex_for(fid, dim) for fid, dim in lay.factors)
            out.append(wires)
            if i < len(self.waves):
                wave = self.waves[i]
                consumed = set()
                for e in wave:
                    consumed |= self.skeleton.pre(e)
                    if self.skeleton.polarity[e] == Polarity.NEGATIVE:
                        consumed.add(("hin", e))
                vertices = [LayerVertex("event", e, 0) for e in wave]
                vertices += [
                    _vertex_for(fid, dim) for fid, dim in lay.factors if fid not in consumed
                ]
                out.append(tuple(vertices))
        return tuple(out)

    def to_dot(self) -> str:
        lines = ["digraph layers {", "  rankdir=TB;"]
        layer_list = self.layers()
        names = {}
        for i, layer in enumerate(layer_list):
            lines.append(f"  subgraph cluster_{i} {{ label=\"L{i}\";")
            for j, v in enumerate(layer):
                name = f"n{i}_{j}"
                names[(i, v.kind, v.ref)] = name
                if v.kind == "event":
                    lines.append(f'    {name} [shape=box, label="e{v.ref}"];')
                elif v.kind == "cond":
                    lines.append(f'    {name} [shape=circle, label="c{v.ref}"];')
                else:
                    lines.append(f'    {name} [shape=plaintext, label="{v.kind}{v.ref}"];')
            lines.append("  }")
        for i in range(len(layer_list) - 1):
            for v in layer_list[i]:
                tgt = _wire_target(self, layer_list, i, v)
                if tgt is not None:
                    lines.append(f"  {names[(i, v.kind, v.ref)]} -> {names[tgt]};")
        lines.append("}")
        return "\n".join(lines)


def _vertex_for(fid, dim) -> LayerVertex:
    if isinstance(fid, tuple):
        return LayerVertex(fid[0], fid[1], dim)
    return LayerVertex("cond", fid, dim)


def _wire_target(g: LayerGraph, layers, i, v):
    nxt = {(w.kind, w.ref) for w in layers[i + 1]}
    if (v.kind, v.ref) in nxt:
        return (i + 1, v.kind, v.ref)
    if v.kind == "cond":
        for w in layers[i + 1]:
            if w.kind == "event" and v.ref in g.skeleton.pre(w.ref):
                return (i + 1, "event", w.ref)
    if v.kind == "hin":
        for w in layers[i + 1]:
            if w.kind == "event" and w.ref == v.ref:
                return (i + 1, "event", w.ref)
    if v.kind == "event":
        for w in layers[i + 1]:
            if w.kind == "cond" and w.ref in g.skeleton.post(v.ref):
                return (i + 1, "cond", w.ref)
            if w.kind == "hout" and w.ref == v.ref:
                return (i + 1, "hout", w.ref)
    return None


def _canonical(pairs) -> FactorLayout:
    return FactorLayout.of(sorted(pairs, key=lambda p: factor_key(p[0])))


def build_layer_graph(
    restricted: NetSkeleton,
    ann: LocalAnnotation,
    from_marking,
    to_marking,
) -> LayerGraph:
    """Schedule the events of a restricted net into waves by causal depth."""
    issues = annotation_issues(restricted, ann)
    if issues:
        raise IllTypedAnnotation("; ".join(issues))
    frm = frozenset(from_marking)
    to = frozenset(to_marking)

    cond_depth = {c: 0 for c in frm}
    remaining = set(restricted.transitions)
    depth_of = {}
    while remaining:
        ready = sorted(
            e for e in remaining if all(c in cond_depth for c in restricted.pre(e))
        )
        if not ready:
            raise NotReachable(
                f"events {sorted(remaining)} are not reachable from {sorted(frm)}"
            )
        for e in ready:
            d = 1 + max((cond_depth[c] for c in restricted.pre(e)), default=0)
            depth_of[e] = d
            remaining.discard(e)
            for c in restricted.post(e):
                cond_depth[c] = d
    waves = []
    for d in sorted(set(depth_of.values())):
        waves.append(tuple(sorted(e for e, dd in depth_of.items() if dd == d)))

    hins = [
        (("hin", t), ann.hdim_of(t))
        for t in sorted(restricted.transitions)
        if restricted.polarity[t] == Polarity.NEGATIVE
    ]
    cur = _canonical([(c, ann.qdim[c]) for c in frm] + hins)
    layouts = [cur]
    marking = set(frm)
    for wave in waves:
        consumed = set()
        for e in wave:
            pre = restricted.pre(e)
            if consumed & pre:
                raise DimensionMismatch(
                    f"wave {wave} is not a concurrent step; shared pre-conditions"
                )
            consumed |= pre
        marking.difference_update(consumed)
        for e in wave:
            marking.update(restricted.post(e))
        pairs = [(c, ann.qdim[c]) for c in marking]
        pairs += [
            (fid, dim)
            for fid, dim in cur.factors
            if isinstance(fid, tuple) and fid[0] == "hin" and fid[1] not in wave
        ]
        pairs += [
            (fid, dim)
            for fid, dim in cur.factors
            if isinstance(fid, tuple) and fid[0] == "hout"
        ]
        pairs += [
            (("hout", e), ann.hdim_of(e))
            for e in wave
            if restricted.polarity[e] == Polarity.POSITIVE
        ]
        cur = _canonical(pairs)
        layouts.append(cur)
    if frozenset(marking) != to:
        raise NotReachable(
            f"interval ends at {sorted(marking)}, expected {sorted(to)}"
        )
    return LayerGraph(
        skeleton=restricted,
        ann=ann,
        from_marking=frm,
        to_marking=to,
        waves=tuple(waves),
        layouts=tuple(layouts),
    )


# ---------------------------------------------------------------- evaluation


@dataclass(eq=False)
class GlobalOperator:
    """A quantum map together with the factor layouts of its domain and codomain."""

    map: QuantumMap
    in_layout: FactorLayout
    out_layout: FactorLayout


def _wave_step(g: LayerGraph, index: int) -> tuple:
    """The wave's map plus its grouped input/output layouts."""
    wave = g.waves[index]
    cur = g.layouts[index]
    nxt = g.layouts[index + 1]
    grouped_in = []
    grouped_out = []
    consumed = set()
    maps = []
    for e in wave:
        lin = event_input_layout(g.skeleton, g.ann, e)
        lout = event_output_layout(g.skeleton, g.ann, e)
        grouped_in += list(lin.factors)
        grouped_out += list(lout.factors)
        consumed |= set(lin.ids)
        maps.append(g.ann.event_map[e])
    rest = [f for f in cur.factors if f[0] not in consumed]
    rest_dim = 1
    for _, d in rest:
        rest_dim *= d
    grouped_in += rest
    grouped_out += rest
    maps.append(identity_map(rest_dim))
    step = tensor_all(maps)
    return step, FactorLayout.of(grouped_in), FactorLayout.of(grouped_out), cur, nxt


def evaluate_diagram(g: LayerGraph, *, elide_identity_layers: bool = True) -> GlobalOperator:
    """Contract the layer graph into one map from `layouts[0]` to `layouts[-1]`."""
    from .linalg import compose

    acc = None
    for i in range(len(g.waves)):
        step, grouped_in, grouped_out, cur, nxt = _wave_step(g, i)
        stack = relayout_kraus(step.kraus, grouped_out, nxt, grouped_in, cur)
        step = QuantumMap(in_dim=cur.total_dim, out_dim=nxt.total_dim, kraus=stack)
        if not elide_identity_layers:
            step = compose(step, identity_map(cur.total_dim))
        acc = step if acc is None else compose(step, acc)
    if acc is None:
        acc = identity_map(g.layouts[0].total_dim)
    if not elide_identity_layers:
        acc = compose(identity_map(g.layouts[-1].total_dim), acc)
    return GlobalOperator(map=acc, in_layout=g.layouts[0], out_layout=g.layouts[-1])


def induced_global(o: OccurrenceNet, ann: LocalAnnotation, m, m2) -> GlobalOperator:
    """Operator of the interval between two markings of an annotated occurrence net."""
    itv = interval(o, m, m2)
    restricted = restrict(o, itv)
    g = build_layer_graph(restricted, ann, itv.from_marking, itv.to_marking)
    return evaluate_diagram(g)


def compose_global(first: GlobalOperator, then: GlobalOperator) -> GlobalOperator:
    """Sequential composite of two interval operators, fully permutation-explicit.

    `first` runs a leg x -> y, `then` the continuation y -> z. The composite
    tensors each leg with identities on the other leg's H slots, aligns the
    middle layouts, and returns the operator with canonical outer layouts. By
    functoriality of the induced annotation, the result matches the direct
    evaluation of the whole interval x -> z.
    """
    first_out = list(first.out_layout.factors)
    then_in = list(then.in_layout.factors)
    mid_conds_a = [f for f in first_out if not isinstance(f[0], tuple)]
    mid_conds_b = [f for f in then_in if not isinstance(f[0], tuple)]
    if sorted(mid_conds_a) != sorted(mid_conds_b):
        raise DimensionMismatch("legs do not share the middle marking spaces")
    hin2 = [f for f in then_in if isinstance(f[0], tuple) and f[0][0] == "hin"]
    hout1 = [f for f in first_out if isinstance(f[0], tuple) and f[0][0] == "hout"]

    hin2_dim = 1
    for _, d in hin2:
        hin2_dim *= d
    hout1_dim = 1
    for _, d in hout1:
        hout1_dim *= d

    a = tensor(first.map, identity_map(hin2_dim))
    a_in = FactorLayout.of(list(first.in_layout.factors) + hin2)
    a_out = FactorLayout.of(first_out + hin2)
    target_in = _canonical(a_in.factors)

    b = tensor(then.map, identity_map(hout1_dim))
    b_in = FactorLayout.of(then_in + hout1)
    b_out = FactorLayout.of(list(then.out_layout.factors) + hout1)
    target_out = _canonical(b_out.factors)

    from .linalg import compose

    a_stack = relayout_kraus(a.kraus, a_out, b_in, a_in, target_in)
    a_aligned = QuantumMap(in_dim=target_in.total_dim, out_dim=b_in.total_dim, kraus=a_stack)
    b_stack = relayout_kraus(b.kraus, b_out, target_out, b_in, b_in)
    b_aligned = QuantumMap(in_dim=b_in.total_dim, out_dim=target_out.total_dim, kraus=b_stack)
    return GlobalOperator(
        map=compose(b_aligned, a_aligned),
        in_layout=target_in,
        out_layout=target_out,
    )


def wire_permutation(g: LayerGraph) -> np.ndarray:
    """Basis rewiring of a diagram whose event maps are all dimension-preserving.

    Returns the integer array `perm` with `perm[j] = i` meaning output basis
    vector j is fed by input basis vector i when every event map is replaced
    by the literal identity. This is pure index bookkeeping and serves as an
    independent oracle for intervals that should act as identities.
    """
    dims0 = g.layouts[0].dims
    idx = np.arange(g.layouts[0].total_dim).reshape(dims0 if dims0 else (1,))
    for i in range(len(g.waves)):
        _, grouped_in, grouped_out, cur, nxt = _wave_step(g, i)
        if grouped_in.total_dim != grouped_out.total_dim:
            raise DimensionMismatch("diagram is not dimension-preserving")
        for e in g.waves[i]:
            lin = event_input_layout(g.skeleton, g.ann, e)
            lout = event_output_layout(g.skeleton, g.ann, e)
            if lin.total_dim != lout.total_dim:
                raise DimensionMismatch(f"event {e} changes dimension")
        axes = [cur.index_of(fid) for fid in grouped_in.ids]
        idx = np.transpose(idx.reshape(cur.dims if cur.dims else (1,)), axes if axes else (0,))
        idx = idx.reshape(grouped_out.dims if grouped_out.dims else (1,))
        axes2 = [grouped_out.index_of(fid) for fid in nxt.ids]
        idx = np.transpose(idx, axes2 if axes2 else (0,))
    return idx.reshape(-1)


def permutation_map(perm: np.ndarray) -> QuantumMap:
    """The unitary channel that rewires basis vectors according to `perm`."""
    d = perm.shape[0]
    mat = np.zeros((d, d), dtype=np.complex128)
    for j, i in enumerate(perm):
        mat[j, int(i)] = 1.0
    return QuantumMap(in_dim=d, out_dim=d, kraus=mat[None, :, :])
