"""Petri nets and occurrence nets: markings, firing, causality, conflict.

Only safe nets are supported: markings are sets of places, and firing into an
already marked place raises SafetyViolation. Occurrence nets derive their
causality order and conflict relation once at construction and are immutable
afterwards, so they can be shared freely.

All set-valued outputs are produced in ascending node-id order so that
reports and serialized artifacts are reproducible.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from typing import Iterable, Mapping

from .config import DEFAULT_STATE_CAP
from .errors import (
    EnumerationCapExceeded,
    InvalidConfiguration,
    InvalidOccurrenceNet,
    NotEnabled,
    NotReachable,
    SafetyViolation,
    UnknownNode,
)

Marking = frozenset


class Polarity(str, Enum):
    NEGATIVE = "-"
    NEUTRAL = "0"
    POSITIVE = "+"

    @classmethod
    def coerce(cls, value) -> "Polarity":
        if isinstance(value, Polarity):
            return value
        return cls(str(value))


NON_NEGATIVE = (Polarity.NEUTRAL, Polarity.POSITIVE)


class NetSkeleton:
    """Bipartite place/transition graph with polarities on transitions."""

    def __init__(self, places: Iterable[int], transitions, flow: Iterable):
        self.places = frozenset(int(p) for p in places)
        if isinstance(transitions, Mapping):
            items = transitions.items()
        else:
            items = []
            for entry in transitions:
                if isinstance(entry, tuple):
                    items.append(entry)
                else:
                    items.append((entry, Polarity.NEUTRAL))
        self.polarity = {int(t): Polarity.coerce(pol) for t, pol in items}
        self.transitions = frozenset(self.polarity)
        if self.places & self.transitions:
            shared = sorted(self.places & self.transitions)
            raise UnknownNode(f"ids used both as place and transition: {shared}")
        for node in self.places | self.transitions:
            if node < 0:
                raise UnknownNode(f"node ids must be non-negative, got {node}")
        self.flow = frozenset((int(a), int(b)) for a, b in flow)
        self._pre = {n: set() for n in self.places | self.transitions}
        self._post = {n: set() for n in self.places | self.transitions}
        for src, dst in self.flow:
            if src in self.places and dst in self.transitions:
                pass
            elif src in self.transitions and dst in self.places:
                pass
            else:
                raise UnknownNode(f"arc ({src}, {dst}) is not place-transition bipartite")
            self._post[src].add(dst)
            self._pre[dst].add(src)
        self._pre = {n: frozenset(v) for n, v in self._pre.items()}
        self._post = {n: frozenset(v) for n, v in self._post.items()}

    def pre(self, node: int) -> frozenset:
        try:
            return self._pre[node]
        except KeyError:
            raise UnknownNode(f"node {node} not in net") from None

    def post(self, node: int) -> frozenset:
        try:
            return self._post[node]
        except KeyError:
            raise UnknownNode(f"node {node} not in net") from None

    @property
    def nodes(self) -> frozenset:
        return self.places | self.transitions

    def max_id(self) -> int:
        return max(self.nodes, default=-1)

    def is_acyclic(self) -> bool:
        return self._topo_order() is not None

    def _topo_order(self):
        indeg = {n: len(self._pre[n]) for n in self.nodes}
        queue = deque(sorted(n for n, d in indeg.items() if d == 0))
        order = []
        while queue:
            n = queue.popleft()
            order.append(n)
            for succ in sorted(self._post[n]):
                indeg[succ] -= 1
                if indeg[succ] == 0:
                    queue.append(succ)
        if len(order) != len(self.nodes):
            return None
        return order

    def renumbered(self, offset: int) -> "NetSkeleton":
        return NetSkeleton(
            places=(p + offset for p in self.places),
            transitions={t + offset: pol for t, pol in self.polarity.items()},
            flow=((a + offset, b + offset) for a, b in self.flow),
        )

    def _key(self):
        return (self.places, tuple(sorted(self.polarity.items())), self.flow)

    def __eq__(self, other):
        return isinstance(other, NetSkeleton) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return (
            f"NetSkeleton({len(self.places)} places, {len(self.transitions)} transitions, "
            f"{len(self.flow)} arcs)"
        )


@dataclass(frozen=True)
class PetriNet:
    skeleton: NetSkeleton
    m0: frozenset

    def __post_init__(self):
        object.__setattr__(self, "m0", frozenset(self.m0))
        stray = self.m0 - self.skeleton.places
        if stray:
            raise UnknownNode(f"initial marking uses unknown places {sorted(stray)}")


# ---------------------------------------------------------------- token game


def _skeleton_of(net) -> NetSkeleton:
    if isinstance(net, PetriNet):
        return net.skeleton
    if isinstance(net, OccurrenceNet):
        return net.skeleton
    return net


def fire(net, m: frozenset, t: int) -> frozenset:
    """One firing step of the token game; strict about safety."""
    s = _skeleton_of(net)
    if t not in s.transitions:
        raise UnknownNode(f"{t} is not a transition")
    pre, post = s.pre(t), s.post(t)
    if not pre <= m:
        raise NotEnabled(f"transition {t} needs {sorted(pre - m)} marked")
    clash = (m - pre) & post
    if clash:
        raise SafetyViolation(f"firing {t} would double-mark {sorted(clash)}")
    return frozenset((m - pre) | post)


def enabled(net, m: frozenset) -> tuple:
    s = _skeleton_of(net)
    return tuple(t for t in sorted(s.transitions) if s.pre(t) <= m)


def _enumerate_markings(net: PetriNet, cap: int):
    seen = {net.m0}
    order = [net.m0]
    queue = deque([net.m0])
    capped = False
    while queue:
        m = queue.popleft()
        for t in enabled(net, m):
            nxt = fire(net, m, t)
            if nxt not in seen:
                if len(seen) >= cap:
                    capped = True
                    queue.clear()
                    break
                seen.add(nxt)
                order.append(nxt)
                queue.append(nxt)
    return order, capped


def reachable_markings(net: PetriNet, max_markings: int = DEFAULT_STATE_CAP) -> list:
    """All reachable markings (BFS order); fails loudly on the state cap."""
    order, capped = _enumerate_markings(net, max_markings)
    if capped:
        raise EnumerationCapExceeded(f"more than {max_markings} reachable markings")
    return order


# ---------------------------------------------------------------- validation reports


@dataclass(frozen=True)
class Clause:
    name: str
    verdict: str  # "pass" | "fail" | "skipped"
    witness: object = None

    def __str__(self):
        extra = f" (witness: {self.witness})" if self.witness is not None else ""
        return f"{self.name}: {self.verdict}{extra}"


@dataclass(frozen=True)
class ValidationReport:
    clauses: tuple

    @property
    def ok(self) -> bool:
        return all(c.verdict == "pass" for c in self.clauses)

    def clause(self, name: str) -> Clause:
        for c in self.clauses:
            if c.name == name:
                return c
        raise KeyError(name)

    def __str__(self):
        return "; ".join(str(c) for c in self.clauses)


def _below_map(skeleton: NetSkeleton):
    """node -> frozenset of nodes at or below it; None if the flow is cyclic."""
    order = skeleton._topo_order()
    if order is None:
        return None
    below = {}
    for n in order:
        acc = {n}
        for p in skeleton.pre(n):
            acc |= below[p]
        below[n] = frozenset(acc)
    return below


def _immediate_conflict_pairs(skeleton: NetSkeleton) -> frozenset:
    pairs = set()
    for p in skeleton.places:
        consumers = sorted(skeleton.post(p))
        for a, b in combinations(consumers, 2):
            pairs.add((a, b))
    return frozenset(pairs)


def validate_occurrence_net(skeleton: NetSkeleton, c0=None) -> ValidationReport:
    """Check the occurrence-net axioms, one clause per axiom, witness on failure."""
    clauses = []
    below = _below_map(skeleton)
    if below is None:
        cycle_witness = _some_cycle_node(skeleton)
        clauses.append(Clause("acyclic flow", "fail", cycle_witness))
    else:
        clauses.append(Clause("acyclic flow", "pass"))

    branched = sorted(c for c in skeleton.places if len(skeleton.pre(c)) > 1)
    if branched:
        clauses.append(Clause("no backward branching", "fail", branched[0]))
    else:
        clauses.append(Clause("no backward branching", "pass"))

    minimal = frozenset(n for n in skeleton.nodes if not skeleton.pre(n))
    wanted = frozenset(c0) if c0 is not None else minimal
    if minimal == wanted and minimal <= skeleton.places:
        clauses.append(Clause("minimal nodes are the initial conditions", "pass"))
    else:
        off = sorted(minimal ^ wanted) or sorted(minimal - skeleton.places)
        clauses.append(Clause("minimal nodes are the initial conditions", "fail", off[0] if off else None))

    if below is None:
        clauses.append(Clause("no self-conflict", "skipped", "needs acyclic flow"))
        clauses.append(Clause("finite cones", "skipped", "needs acyclic flow"))
    else:
        witness = None
        imm = _immediate_conflict_pairs(skeleton)
        for node in sorted(skeleton.nodes):
            events = below[node] & skeleton.transitions
            if any(a in events and b in events for a, b in imm):
                witness = node
                break
        if witness is None:
            clauses.append(Clause("no self-conflict", "pass"))
        else:
            clauses.append(Clause("no self-conflict", "fail", witness))
        # Finite input plus acyclic flow keeps every causal cone finite.
        clauses.append(Clause("finite cones", "pass"))
    return ValidationReport(tuple(clauses))


def _some_cycle_node(skeleton: NetSkeleton):
    remaining = set(skeleton.nodes)
    changed = True
    while changed:
        changed = False
        for n in list(remaining):
            if not (skeleton.pre(n) & remaining):
                remaining.discard(n)
                changed = True
    return min(remaining) if remaining else None


# ---------------------------------------------------------------- occurrence nets


class OccurrenceNet:
    """An acyclic safe net with derived causality and conflict relations."""

    def __init__(self, skeleton: NetSkeleton, c0=None, check: bool = True):
        self.skeleton = skeleton
        minimal = frozenset(n for n in skeleton.nodes if not skeleton.pre(n))
        self.c0 = frozenset(c0) if c0 is not None else minimal
        if check:
            report = validate_occurrence_net(skeleton, self.c0)
            if not report.ok:
                raise InvalidOccurrenceNet(report)
        self._below = _below_map(skeleton)
        self._event_cone = {
            n: frozenset(v & skeleton.transitions) for n, v in self._below.items()
        }
        self._imm = _immediate_conflict_pairs(skeleton)

    @property
    def events(self) -> tuple:
        return tuple(sorted(self.skeleton.transitions))

    @property
    def conditions(self) -> tuple:
        return tuple(sorted(self.skeleton.places))

    def polarity(self, event: int) -> Polarity:
        return self.skeleton.polarity[event]

    def leq(self, a: int, b: int) -> bool:
        if b not in self._below:
            raise UnknownNode(f"node {b} not in net")
        return a in self._below[b]

    def cone(self, event: int) -> frozenset:
        """Events at or below the given event (its causal history)."""
        if event not in self.skeleton.transitions:
            raise UnknownNode(f"{event} is not an event")
        return self._event_cone[event]

    def _node_conflict(self, x: int, y: int) -> bool:
        cx, cy = self._event_cone[x], self._event_cone[y]
        return any((a in cx and b in cy) or (a in cy and b in cx) for a, b in self._imm)

    def conflict(self, x: int, y: int) -> bool:
        """Inherited conflict between two events."""
        for n in (x, y):
            if n not in self.skeleton.transitions:
                raise UnknownNode(f"{n} is not an event")
        return self._node_conflict(x, y)

    # -------------------------------------------------- configurations and cuts

    def is_configuration(self, events) -> bool:
        evs = frozenset(events)
        if not evs <= self.skeleton.transitions:
            return False
        for e in evs:
            if not (self._event_cone[e] - {e}) <= evs:
                return False
        for a, b in self._imm:
            if a in evs and b in evs:
                return False
        return True

    def check_configuration(self, events) -> frozenset:
        evs = frozenset(events)
        stray = evs - self.skeleton.transitions
        if stray:
            raise UnknownNode(f"unknown events {sorted(stray)}")
        if not self.is_configuration(evs):
            raise InvalidConfiguration(f"{sorted(evs)} is not downward closed and conflict free")
        return evs

    def cut_of(self, events) -> frozenset:
        """Marking reached after executing exactly the given configuration."""
        evs = self.check_configuration(events)
        produced = set()
        consumed = set()
        for e in evs:
            produced |= self.skeleton.post(e)
            consumed |= self.skeleton.pre(e)
        return frozenset((self.c0 | produced) - consumed)

    def config_of_marking(self, m) -> frozenset:
        m = frozenset(m)
        stray = m - self.skeleton.places
        if stray:
            raise UnknownNode(f"unknown conditions {sorted(stray)}")
        evs = set()
        for c in m:
            for producer in self.skeleton.pre(c):
                evs |= self._event_cone[producer]
        config = frozenset(evs)
        if not self.is_configuration(config) or self.cut_of(config) != m:
            raise NotReachable(f"marking {sorted(m)} is not reachable")
        return config

    def single_extensions(self, config) -> tuple:
        """Events that extend the configuration by one step, ascending ids."""
        cut = self.cut_of(config)
        evs = frozenset(config)
        return tuple(
            e for e in self.events if e not in evs and self.skeleton.pre(e) <= cut
        )

    def _enumerate_configurations(self, cap: int):
        seen = {frozenset()}
        order = [frozenset()]
        queue = deque([frozenset()])
        capped = False
        while queue:
            x = queue.popleft()
            for e in self.single_extensions(x):
                nxt = frozenset(x | {e})
                if nxt not in seen:
                    if len(seen) >= cap:
                        capped = True
                        queue.clear()
                        break
                    seen.add(nxt)
                    order.append(nxt)
                    queue.append(nxt)
        return order, capped

    def configurations_upto(self, max_configs: int = DEFAULT_STATE_CAP) -> list:
        order, capped = self._enumerate_configurations(max_configs)
        if capped:
            raise EnumerationCapExceeded(f"more than {max_configs} configurations")
        return order


# ---------------------------------------------------------------- intervals


@dataclass(frozen=True)
class MarkingInterval:
    """Everything touched while going from one marking to another."""

    from_marking: frozenset
    to_marking: frozenset
    conditions: frozenset
    events: frozenset


def interval(o: OccurrenceNet, m, m2) -> MarkingInterval:
    x = o.config_of_marking(m)
    y = o.config_of_marking(m2)
    if not x <= y:
        raise NotReachable(f"{sorted(m2)} is not reachable from {sorted(m)}")
    sigma = y - x
    conditions = set(m)
    for e in sigma:
        conditions |= o.skeleton.post(e)
    return MarkingInterval(
        from_marking=frozenset(m),
        to_marking=frozenset(m2),
        conditions=frozenset(conditions),
        events=frozenset(sigma),
    )


def restrict(o: OccurrenceNet, itv: MarkingInterval) -> NetSkeleton:
    """Sub-skeleton keeping exactly the interval's conditions and events."""
    keep = itv.conditions | itv.events
    return NetSkeleton(
        places=itv.conditions,
        transitions={t: o.skeleton.polarity[t] for t in itv.events},
        flow=((a, b) for a, b in o.skeleton.flow if a in keep and b in keep),
    )


# ---------------------------------------------------------------- conflict clusters


@dataclass(frozen=True)
class ConflictCluster:
    """Connected component of the conflict graph among co-enabled events."""

    events: tuple
    edges: frozenset
    is_clique: bool = field(default=False)


def clusters_at(skeleton: NetSkeleton, marking, polarities=NON_NEGATIVE) -> list:
    """Conflict clusters of the enabled events of the given polarities at a marking.

    Conflict between co-enabled events is structural: shared pre-conditions.
    Works for occurrence nets (marking = a cut) and plain Petri nets alike.
    """
    m = frozenset(marking)
    active = [
        t
        for t in sorted(skeleton.transitions)
        if skeleton.polarity[t] in polarities and skeleton.pre(t) <= m
    ]
    edges = {
        (a, b)
        for a, b in combinations(active, 2)
        if skeleton.pre(a) & skeleton.pre(b)
    }
    clusters = []
    unvisited = set(active)
    for root in active:
        if root not in unvisited:
            continue
        component = {root}
        frontier = deque([root])
        unvisited.discard(root)
        while frontier:
            n = frontier.popleft()
            for a, b in edges:
                other = b if a == n else (a if b == n else None)
                if other is not None and other in unvisited:
                    unvisited.discard(other)
                    component.add(other)
                    frontier.append(other)
        members = tuple(sorted(component))
        inner = frozenset((a, b) for a, b in edges if a in component and b in component)
        full = len(members) * (len(members) - 1) // 2
        clusters.append(ConflictCluster(events=members, edges=inner, is_clique=len(inner) == full))
    return clusters


def conflict_clusters(o: OccurrenceNet, config) -> list:
    """Clusters of enabled non-negative events at the cut of a configuration."""
    return clusters_at(o.skeleton, o.cut_of(config))


# ---------------------------------------------------------------- race freeness


def minimal_conflicts(skeleton: NetSkeleton) -> frozenset:
    """Minimal-conflict pairs (a, b), a < b.

    On acyclic skeletons this is inherited conflict restricted to pairs with no
    conflicting strict ancestors; on cyclic skeletons (general Petri nets) it
    falls back to the structural relation, shared pre-places.
    """
    below = _below_map(skeleton)
    imm = _immediate_conflict_pairs(skeleton)
    if below is None:
        return imm
    cones = {t: below[t] & skeleton.transitions for t in skeleton.transitions}

    def in_conflict(a, b):
        ca, cb = cones[a], cones[b]
        return any((u in ca and v in cb) or (u in cb and v in ca) for u, v in imm)

    events = sorted(skeleton.transitions)
    result = set()
    for a, b in combinations(events, 2):
        if not in_conflict(a, b):
            continue
        preds_a = cones[a] - {a}
        preds_b = cones[b] - {b}
        if any(in_conflict(ap, b) for ap in preds_a):
            continue
        if any(in_conflict(a, bp) for bp in preds_b):
            continue
        result.add((a, b))
    return frozenset(result)


def is_race_free(skeleton: NetSkeleton) -> bool:
    """Negative events minimally conflict only with negative events."""
    neg = Polarity.NEGATIVE
    for a, b in minimal_conflicts(skeleton):
        pa, pb = skeleton.polarity[a], skeleton.polarity[b]
        if not ((pa == neg and pb == neg) or (pa != neg and pb != neg)):
            return False
    return True


def skeleton_clusters(skeleton: NetSkeleton) -> list:
    """Components of the minimal-conflict graph over all transitions, ascending."""
    edges = minimal_conflicts(skeleton)
    adjacency = {t: set() for t in skeleton.transitions}
    for a, b in edges:
        adjacency[a].add(b)
        adjacency[b].add(a)
    seen = set()
    clusters = []
    for root in sorted(skeleton.transitions):
        if root in seen:
            continue
        component = {root}
        frontier = deque([root])
        seen.add(root)
        while frontier:
            n = frontier.popleft()
            for other in adjacency[n]:
                if other not in seen:
                    seen.add(other)
                    component.add(other)
                    frontier.append(other)
        clusters.append(frozenset(component))
    return clusters
