"""Compositional operations: parallel composition and event joins.

Parallel composition juxtaposes two certified nets (ids renumbered apart).
A join merges a positive event with a matching negative event into one
neutral event that feeds the positive side's H output into the negative
side's H input. Drop-preserving joins batch single joins along a bijection
between a maximal negative cluster and a positive cluster; on race-free nets
this preserves race-freeness and the drop condition, which the artifact
re-verifies instead of assuming.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .annotation import LocalAnnotation, event_input_layout, event_output_layout
from .errors import JoinError, NotCertified
from .linalg import FactorLayout, QuantumMap, compose, identity_map, relayout_kraus, tensor
from .nets import (
    Clause,
    NetSkeleton,
    PetriNet,
    Polarity,
    ValidationReport,
    is_race_free,
    minimal_conflicts,
    skeleton_clusters,
)
from .verification import CertificationReport, CheckBounds, certify_qpn


# ---------------------------------------------------------------- parallel


@dataclass(eq=False)
class ComposeResult:
    net: PetriNet
    ann: LocalAnnotation
    offset: int
    left_certification: CertificationReport | None
    right_certification: CertificationReport | None
    recertification: CertificationReport | None


def parallel_compose(
    net1: PetriNet,
    ann1: LocalAnnotation,
    net2: PetriNet,
    ann2: LocalAnnotation,
    *,
    bounds: CheckBounds = CheckBounds(),
    tol: float = 1e-8,
    assume_certified: bool = False,
    paranoid: bool = False,
) -> ComposeResult:
    """Disjoint union of two certified nets; certification is inherited.

    The second net's ids are shifted above the first net's. With
    `paranoid=True` the composite is re-certified anyway and the report
    attached.
    """
    left = right = None
    if not assume_certified:
        left = certify_qpn(net1, ann1, bounds=bounds, tol=tol)
        if not left.certified:
            raise NotCertified("left operand is not a certified quantum Petri net")
        right = certify_qpn(net2, ann2, bounds=bounds, tol=tol)
        if not right.certified:
            raise NotCertified("right operand is not a certified quantum Petri net")
    offset = net1.skeleton.max_id() + 1
    shifted = net2.skeleton.renumbered(offset)
    skeleton = NetSkeleton(
        places=net1.skeleton.places | shifted.places,
        transitions={**net1.skeleton.polarity, **shifted.polarity},
        flow=net1.skeleton.flow | shifted.flow,
    )
    net = PetriNet(skeleton, net1.m0 | frozenset(p + offset for p in net2.m0))
    ann = LocalAnnotation(
        qdim={**ann1.qdim, **{c + offset: d for c, d in ann2.qdim.items()}},
        event_map={**ann1.event_map, **{t + offset: m for t, m in ann2.event_map.items()}},
        hdim={**ann1.hdim, **{t + offset: h for t, h in ann2.hdim.items()}},
    )
    recert = None
    if paranoid:
        recert = certify_qpn(net, ann, bounds=bounds, tol=tol)
    return ComposeResult(
        net=net,
        ann=ann,
        offset=offset,
        left_certification=left,
        right_certification=right,
        recertification=recert,
    )


# ---------------------------------------------------------------- single join


def _joined_map(
    skeleton: NetSkeleton, ann: LocalAnnotation, e_pos: int, e_neg: int
) -> QuantumMap:
    """Map of the joined event: run the positive side, feed its H output
    into the negative side's H input, with canonical outer layouts."""
    qd = ann.qdim
    pre_pos = sorted(skeleton.pre(e_pos))
    pre_neg = sorted(skeleton.pre(e_neg))
    post_pos = sorted(skeleton.post(e_pos))
    post_neg = sorted(skeleton.post(e_neg))
    neg_in_dim = 1
    for c in pre_neg:
        neg_in_dim *= qd[c]
    pos_out_dim = 1
    for c in post_pos:
        pos_out_dim *= qd[c]

    # Positive leg, padded with identity on the negative side's conditions.
    a = tensor(ann.event_map[e_pos], identity_map(neg_in_dim))
    a_in = FactorLayout.of(
        list(event_input_layout(skeleton, ann, e_pos).factors)
        + [(c, qd[c]) for c in pre_neg]
    )
    a_out = FactorLayout.of(
        list(event_output_layout(skeleton, ann, e_pos).factors)
        + [(c, qd[c]) for c in pre_neg]
    )
    canon_in = FactorLayout.of([(c, qd[c]) for c in sorted(pre_pos + pre_neg)])
    # Move the H slot to the last position so it lines up with the negative
    # side's H input, which sits last in that event's input layout.
    mid_a = FactorLayout.of(
        [(c, qd[c]) for c in post_pos]
        + [(c, qd[c]) for c in pre_neg]
        + [(("hout", e_pos), ann.hdim_of(e_pos))]
    )
    a_stack = relayout_kraus(a.kraus, a_out, mid_a, a_in, canon_in)
    a_aligned = QuantumMap(in_dim=canon_in.total_dim, out_dim=mid_a.total_dim, kraus=a_stack)

    # Negative leg, padded with identity on the positive side's outputs.
    b = tensor(identity_map(pos_out_dim), ann.event_map[e_neg])
    b_in = FactorLayout.of(
        [(c, qd[c]) for c in post_pos]
        + list(event_input_layout(skeleton, ann, e_neg).factors)
    )
    b_out = FactorLayout.of(
        [(c, qd[c]) for c in post_pos]
        + list(event_output_layout(skeleton, ann, e_neg).factors)
    )
    canon_out = FactorLayout.of([(c, qd[c]) for c in sorted(post_pos + post_neg)])
    b_stack = relayout_kraus(b.kraus, b_out, canon_out, b_in, b_in)
    b_aligned = QuantumMap(in_dim=b_in.total_dim, out_dim=canon_out.total_dim, kraus=b_stack)
    # mid_a and b_in agree positionally (dims per slot), which is all compose needs.
    return compose(b_aligned, a_aligned)


def single_join(
    skeleton: NetSkeleton,
    ann: LocalAnnotation,
    e_pos: int,
    e_neg: int,
    *,
    new_id: int | None = None,
):
    """Merge a positive and a negative event into one neutral event.

    Returns (skeleton, annotation, new_event_id). The pre- and post-sets of
    the joined event are the disjoint unions of its parents'; overlapping
    environments are rejected because they would make the result unsafe or
    ill-typed.
    """
    for e in (e_pos, e_neg):
        if e not in skeleton.transitions:
            raise JoinError(f"{e} is not a transition")
    if skeleton.polarity[e_pos] != Polarity.POSITIVE:
        raise JoinError(f"event {e_pos} must be positive, is {skeleton.polarity[e_pos].value}")
    if skeleton.polarity[e_neg] != Polarity.NEGATIVE:
        raise JoinError(f"event {e_neg} must be negative, is {skeleton.polarity[e_neg].value}")
    if ann.hdim_of(e_pos) != ann.hdim_of(e_neg):
        raise JoinError(
            f"H dimensions differ: {ann.hdim_of(e_pos)} vs {ann.hdim_of(e_neg)}"
        )
    if skeleton.pre(e_pos) & skeleton.pre(e_neg):
        raise JoinError("joined events must have disjoint pre-sets")
    if skeleton.post(e_pos) & skeleton.post(e_neg):
        raise JoinError("joined events must have disjoint post-sets")
    if new_id is None:
        new_id = skeleton.max_id() + 1
    joined = _joined_map(skeleton, ann, e_pos, e_neg)

    transitions = {t: pol for t, pol in skeleton.polarity.items() if t not in (e_pos, e_neg)}
    transitions[new_id] = Polarity.NEUTRAL
    flow = []
    for a, b in skeleton.flow:
        src = new_id if a in (e_pos, e_neg) else a
        dst = new_id if b in (e_pos, e_neg) else b
        flow.append((src, dst))
    new_skeleton = NetSkeleton(places=skeleton.places, transitions=transitions, flow=flow)

    event_map = {t: m for t, m in ann.event_map.items() if t not in (e_pos, e_neg)}
    event_map[new_id] = joined
    hdim = {t: h for t, h in ann.hdim.items() if t not in (e_pos, e_neg)}
    hdim[new_id] = 1
    new_ann = LocalAnnotation(qdim=dict(ann.qdim), event_map=event_map, hdim=hdim)
    return new_skeleton, new_ann, new_id


# ---------------------------------------------------------------- join specs


@dataclass(frozen=True)
class JoinSpec:
    """A batch of joins: bijection from a negative cluster onto positive events."""

    negatives: tuple
    positives: tuple
    pairing: tuple  # ((negative, positive), ...)
    enclosing: frozenset | None = None

    @staticmethod
    def of(pairing: Mapping | tuple, enclosing=None) -> "JoinSpec":
        pairs = tuple(sorted(pairing.items())) if isinstance(pairing, Mapping) else tuple(
            sorted(pairing)
        )
        return JoinSpec(
            negatives=tuple(n for n, _ in pairs),
            positives=tuple(p for _, p in pairs),
            pairing=pairs,
            enclosing=None if enclosing is None else frozenset(enclosing),
        )

    def positive_of(self, n: int) -> int:
        for a, b in self.pairing:
            if a == n:
                return b
        raise KeyError(n)


def validate_drop_preserving(
    skeleton: NetSkeleton, ann: LocalAnnotation, spec: JoinSpec
) -> ValidationReport:
    """Check every structural requirement of a drop-preserving join."""
    clauses = []
    neg_set = frozenset(spec.negatives)
    pos_set = frozenset(spec.positives)

    unknown = sorted((neg_set | pos_set) - skeleton.transitions)
    if unknown:
        clauses.append(Clause("events exist", "fail", unknown[0]))
        return ValidationReport(tuple(clauses))
    clauses.append(Clause("events exist", "pass"))

    bad = sorted(n for n in neg_set if skeleton.polarity[n] != Polarity.NEGATIVE)
    clauses.append(
        Clause("joined cluster is negative", "pass" if not bad else "fail", bad[0] if bad else None)
    )
    bad = sorted(p for p in pos_set if skeleton.polarity[p] != Polarity.POSITIVE)
    clauses.append(
        Clause("target events are positive", "pass" if not bad else "fail", bad[0] if bad else None)
    )

    if len(pos_set) != len(spec.negatives) or len(neg_set) != len(spec.negatives):
        clauses.append(Clause("pairing is a bijection", "fail"))
    else:
        clauses.append(Clause("pairing is a bijection", "pass"))

    components = skeleton_clusters(skeleton)
    hit = [comp for comp in components if comp & neg_set]
    if len(hit) == 1 and hit[0] == neg_set:
        clauses.append(Clause("negative cluster is maximal", "pass"))
    else:
        stray = sorted((set().union(*hit) if hit else set()) ^ neg_set)
        clauses.append(
            Clause("negative cluster is maximal", "fail", stray[0] if stray else None)
        )

    if spec.enclosing is not None:
        enclosing_ok = any(spec.enclosing == comp for comp in components) and pos_set <= (
            spec.enclosing
        )
        neutral_ok = all(
            skeleton.polarity[t] != Polarity.NEGATIVE for t in spec.enclosing
        )
        clauses.append(
            Clause(
                "enclosing cluster covers the positives",
                "pass" if enclosing_ok and neutral_ok else "fail",
            )
        )

    edges = minimal_conflicts(skeleton)
    witness = None
    for a, b in edges:
        if a in neg_set and b in neg_set:
            fa, fb = spec.positive_of(a), spec.positive_of(b)
            if (min(fa, fb), max(fa, fb)) not in edges:
                witness = (a, b)
                break
    clauses.append(
        Clause("pairing preserves conflicts", "pass" if witness is None else "fail", witness)
    )

    witness = None
    for n, p in spec.pairing:
        if ann.hdim_of(n) != ann.hdim_of(p):
            witness = (n, p)
            break
    clauses.append(
        Clause("H dimensions match", "pass" if witness is None else "fail", witness)
    )

    witness = None
    for n, p in spec.pairing:
        if skeleton.pre(n) & skeleton.pre(p) or skeleton.post(n) & skeleton.post(p):
            witness = (n, p)
            break
    clauses.append(
        Clause("pair environments are disjoint", "pass" if witness is None else "fail", witness)
    )

    clauses.append(
        Clause("net is race-free", "pass" if is_race_free(skeleton) else "fail")
    )
    return ValidationReport(tuple(clauses))


@dataclass(eq=False)
class JoinResult:
    net: PetriNet
    ann: LocalAnnotation
    joined_events: tuple  # ((negative, positive, new_id), ...)
    validation: ValidationReport
    race_free_after: bool
    drop_after: object | None
    obliviousness_after: object | None
    clusters_before: tuple
    clusters_after: tuple


def drop_preserving_join(
    net: PetriNet,
    ann: LocalAnnotation,
    spec: JoinSpec,
    *,
    bounds: CheckBounds = CheckBounds(),
    tol: float = 1e-8,
    assume_certified: bool = False,
    recheck: bool = True,
) -> JoinResult:
    """Perform a validated batch of joins, ascending negative-event ids.

    Race-freeness and the drop condition are inherited by construction, but
    both are re-verified by default; obliviousness is always re-checked and
    reported because joins do not promise to preserve it.
    """
    skeleton = net.skeleton
    validation = validate_drop_preserving(skeleton, ann, spec)
    if not validation.ok:
        raise JoinError(f"invalid drop-preserving join: {validation}")
    if not assume_certified:
        cert = certify_qpn(net, ann, bounds=bounds, tol=tol)
        if not cert.certified:
            raise NotCertified("source net is not a certified quantum Petri net")
    clusters_before = tuple(skeleton_clusters(skeleton))

    cur_skeleton, cur_ann = skeleton, ann
    joined = []
    for n in spec.negatives:
        p = spec.positive_of(n)
        cur_skeleton, cur_ann, new_id = single_join(cur_skeleton, cur_ann, p, n)
        joined.append((n, p, new_id))

    result_net = PetriNet(cur_skeleton, net.m0)
    race_after = is_race_free(cur_skeleton)
    drop_after = None
    obliv_after = None
    if recheck:
        from .verification import check_local_drop, check_local_obliviousness

        drop_after = check_local_drop(result_net, cur_ann, bounds=bounds, tol=tol)
        obliv_after = check_local_obliviousness(cur_skeleton, cur_ann, tol)
    return JoinResult(
        net=result_net,
        ann=cur_ann,
        joined_events=tuple(joined),
        validation=validation,
        race_free_after=race_after,
        drop_after=drop_after,
        obliviousness_after=obliv_after,
        clusters_before=clusters_before,
        clusters_after=tuple(skeleton_clusters(cur_skeleton)),
    )
