"""Depth-bounded branching processes of safe Petri nets.

The unfolder explores possible extensions in lexicographic (transition id,
pre-set ids) order and numbers fresh nodes consecutively in creation order,
so two runs over the same input produce identical output. The full unfolding
may be infinite; bounds on event count and causal depth keep the prefix
finite and predictable.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from itertools import product

from .annotation import LocalAnnotation
from .errors import IllTypedAnnotation, QpnError, SafetyViolation
from .nets import (
    Clause,
    NetSkeleton,
    OccurrenceNet,
    PetriNet,
    Polarity,
    ValidationReport,
    validate_occurrence_net,
)


@dataclass(frozen=True)
class UnfoldLimit:
    max_events: int = 64
    max_depth: int = 16

    def __post_init__(self):
        if self.max_events < 0 or self.max_depth < 0:
            raise QpnError("unfold limits must be non-negative")


class OccurrenceBuilder:
    """Grow an occurrence net one node at a time, with incremental co-set queries."""

    def __init__(self):
        self.next_id = 0
        self.conditions = []
        self.events = []
        self.polarity = {}
        self.pre = {}
        self.post = defaultdict(set)
        self.producer = {}
        self.below = {}
        self.event_cone = {}
        self.imm = set()

    def _fresh(self) -> int:
        nid = self.next_id
        self.next_id += 1
        return nid

    def add_condition(self, producer: int | None = None) -> int:
        cid = self._fresh()
        self.conditions.append(cid)
        self.producer[cid] = producer
        if producer is None:
            self.below[cid] = frozenset({cid})
            self.event_cone[cid] = frozenset()
        else:
            self.post[producer].add(cid)
            self.below[cid] = self.below[producer] | {cid}
            self.event_cone[cid] = self.event_cone[producer]
        return cid

    def add_event(self, pre_conditions, polarity) -> int:
        pre = frozenset(pre_conditions)
        eid = self._fresh()
        self.events.append(eid)
        self.polarity[eid] = Polarity.coerce(polarity)
        self.pre[eid] = pre
        below = {eid}
        cone = {eid}
        for c in pre:
            below |= self.below[c]
            cone |= self.event_cone[c]
            for other in self.post_events(c):
                if other != eid:
                    self.imm.add((min(other, eid), max(other, eid)))
            self.post.setdefault(c, set())
        for c in pre:
            self.post[c].add(eid)
        self.below[eid] = frozenset(below)
        self.event_cone[eid] = frozenset(cone)
        return eid

    def post_events(self, cid: int):
        return {n for n in self.post.get(cid, ()) if n in self.polarity}

    def leq(self, a: int, b: int) -> bool:
        return a in self.below[b]

    def in_conflict(self, a: int, b: int) -> bool:
        ca, cb = self.event_cone[a], self.event_cone[b]
        return any((u in ca and v in cb) or (u in cb and v in ca) for u, v in self.imm)

    def concurrent(self, a: int, b: int) -> bool:
        return a != b and not self.leq(a, b) and not self.leq(b, a) and not self.in_conflict(a, b)

    def is_coset(self, conds) -> bool:
        conds = sorted(conds)
        for i, a in enumerate(conds):
            for b in conds[i + 1 :]:
                if not self.concurrent(a, b):
                    return False
        return True

    def skeleton(self) -> NetSkeleton:
        flow = []
        for e in self.events:
            flow += [(c, e) for c in self.pre[e]]
        for c in self.conditions:
            flow += [(e, c) for e in [self.producer[c]] if e is not None]
        return NetSkeleton(
            places=self.conditions,
            transitions={e: self.polarity[e] for e in self.events},
            flow=flow,
        )

    def to_occurrence_net(self) -> OccurrenceNet:
        c0 = [c for c in self.conditions if self.producer[c] is None]
        return OccurrenceNet(self.skeleton(), c0=c0)


@dataclass(eq=False)
class BranchingProcess:
    """A labeled occurrence net over a base Petri net."""

    occ: OccurrenceNet
    place_label: dict
    event_label: dict
    complete: bool

    def label(self, node: int) -> int:
        if node in self.place_label:
            return self.place_label[node]
        return self.event_label[node]

    def project_marking(self, marking) -> frozenset:
        return frozenset(self.place_label[c] for c in marking)


def unfold(net: PetriNet, limit: UnfoldLimit) -> BranchingProcess:
    """Bounded prefix of the unfolding, maximal relative to the given limits."""
    base = net.skeleton
    for t in sorted(base.transitions):
        if not base.pre(t):
            raise QpnError(f"cannot unfold: transition {t} has an empty pre-set")
    b = OccurrenceBuilder()
    place_label = {}
    event_label = {}
    cond_by_label = defaultdict(list)
    cond_depth = {}
    for p in sorted(net.m0):
        cid = b.add_condition(None)
        place_label[cid] = p
        cond_by_label[p].append(cid)
        cond_depth[cid] = 0

    present = set()
    complete = True
    while True:
        candidates = []
        for t in sorted(base.transitions):
            pools = [cond_by_label[p] for p in sorted(base.pre(t))]
            if any(not pool for pool in pools):
                continue
            for combo in product(*pools):
                x = frozenset(combo)
                if (t, x) in present or not b.is_coset(x):
                    continue
                depth = 1 + max(cond_depth[c] for c in x)
                if depth > limit.max_depth:
                    complete = False
                    continue
                candidates.append((t, tuple(sorted(x)), depth))
        if not candidates:
            break
        candidates.sort()
        hit_cap = False
        for t, xt, depth in candidates:
            if len(event_label) >= limit.max_events:
                complete = False
                hit_cap = True
                break
            x = frozenset(xt)
            if (t, x) in present:
                continue
            eid = b.add_event(x, base.polarity[t])
            event_label[eid] = t
            present.add((t, x))
            for p in sorted(base.post(t)):
                cid = b.add_condition(eid)
                place_label[cid] = p
                cond_depth[cid] = depth
                for other in cond_by_label[p]:
                    if b.concurrent(cid, other):
                        raise SafetyViolation(
                            f"place {p} can hold two tokens at once "
                            f"(conditions {other} and {cid})"
                        )
                cond_by_label[p].append(cid)
        if hit_cap:
            break
    return BranchingProcess(
        occ=b.to_occurrence_net(),
        place_label=place_label,
        event_label=event_label,
        complete=complete,
    )


def validate_branching_process(net: PetriNet, bp: BranchingProcess) -> ValidationReport:
    """One verdict per branching-process axiom, with witnesses on failure."""
    base = net.skeleton
    occ = bp.occ
    clauses = list(validate_occurrence_net(occ.skeleton, occ.c0).clauses)

    witness = None
    for c in occ.conditions:
        if bp.place_label.get(c) not in base.places:
            witness = c
            break
    if witness is None:
        for e in occ.events:
            if bp.event_label.get(e) not in base.transitions:
                witness = e
                break
    clauses.append(
        Clause("labels preserve node kinds", "pass" if witness is None else "fail", witness)
    )

    witness = None
    for e in occ.events:
        if bp.event_label.get(e) not in base.transitions:
            witness = e
            break
        t = bp.event_label[e]
        pre_labels = [bp.place_label.get(c) for c in occ.skeleton.pre(e)]
        post_labels = [bp.place_label.get(c) for c in occ.skeleton.post(e)]
        if len(set(pre_labels)) != len(pre_labels) or set(pre_labels) != set(base.pre(t)):
            witness = e
            break
        if len(set(post_labels)) != len(post_labels) or set(post_labels) != set(base.post(t)):
            witness = e
            break
        if occ.skeleton.polarity[e] != base.polarity[t]:
            witness = e
            break
    clauses.append(
        Clause("labels preserve environments", "pass" if witness is None else "fail", witness)
    )

    minimal_labels = [bp.place_label.get(c) for c in sorted(occ.c0)]
    bijective = len(set(minimal_labels)) == len(minimal_labels) and set(minimal_labels) == set(
        net.m0
    )
    clauses.append(
        Clause(
            "starts at the initial marking",
            "pass" if bijective else "fail",
            None if bijective else sorted(occ.c0),
        )
    )

    witness = None
    seen = {}
    for e in sorted(occ.events):
        key = (bp.event_label.get(e), occ.skeleton.pre(e))
        if key in seen:
            witness = (seen[key], e)
            break
        seen[key] = e
    clauses.append(
        Clause("no duplicated transitions", "pass" if witness is None else "fail", witness)
    )
    return ValidationReport(tuple(clauses))


def lift_annotation(bp: BranchingProcess, ann: LocalAnnotation) -> LocalAnnotation:
    """Transport a base-net annotation to the prefix along the labeling.

    The ascending-id order of an event's pre- or post-conditions in the prefix
    may differ from the ascending order of their labels in the base net, so
    each lifted map gets its tensor factors permuted into the prefix's
    canonical order instead of being reused verbatim.
    """
    from .linalg import FactorLayout, permute_map_factors

    qdim = {}
    for c in bp.occ.conditions:
        p = bp.place_label[c]
        if p not in ann.qdim:
            raise IllTypedAnnotation(f"place {p} has no space dimension")
        qdim[c] = ann.qdim[p]
    event_map = {}
    hdim = {}
    cache = {}
    skel = bp.occ.skeleton
    for e in bp.occ.events:
        t = bp.event_label[e]
        if t not in ann.event_map:
            raise IllTypedAnnotation(f"transition {t} has no quantum map")
        hdim[e] = ann.hdim_of(t)
        pre_labels = tuple(bp.place_label[c] for c in sorted(skel.pre(e)))
        post_labels = tuple(bp.place_label[c] for c in sorted(skel.post(e)))
        key = (t, pre_labels, post_labels)
        if key not in cache:
            m = ann.event_map[t]
            pol = skel.polarity[e]
            hin = [(("hin", t), ann.hdim_of(t))] if pol == Polarity.NEGATIVE else []
            hout = [(("hout", t), ann.hdim_of(t))] if pol == Polarity.POSITIVE else []
            in_from = FactorLayout.of([(p, ann.qdim[p]) for p in sorted(pre_labels)] + hin)
            in_to = FactorLayout.of([(p, ann.qdim[p]) for p in pre_labels] + hin)
            out_from = FactorLayout.of([(p, ann.qdim[p]) for p in sorted(post_labels)] + hout)
            out_to = FactorLayout.of([(p, ann.qdim[p]) for p in post_labels] + hout)
            cache[key] = permute_map_factors(m, in_from, in_to, out_from, out_to)
        event_map[e] = cache[key]
    return LocalAnnotation(qdim=qdim, event_map=event_map, hdim=hdim)
