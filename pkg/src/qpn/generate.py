"""Seeded random nets, annotations, and join instances for tests and benchmarks.

Everything here is deterministic in the seed. Generated occurrence nets stay
desk-sized (few events, small space dimensions) and keep the total tensor
dimension of every reachable cut within a budget, so the brute-force oracle
remains affordable.
"""

from __future__ import annotations

import numpy as np

from .annotation import LocalAnnotation, annotation_issues, event_input_layout, event_output_layout
from .linalg import QuantumMap, identity_map, quantum_map
from .nets import NetSkeleton, OccurrenceNet, PetriNet, Polarity
from .composition import JoinSpec
from .unfolding import OccurrenceBuilder


def make_rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


# ---------------------------------------------------------------- random maps


def random_unitary(rng, d: int) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(rng, d: int) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def sub_unitary_map(rng, in_dim: int, out_dim: int, scale: float = 0.7) -> QuantumMap:
    """Single Kraus operator: a scaled corner of a random unitary."""
    d = max(in_dim, out_dim)
    u = random_unitary(rng, d)
    return quantum_map([scale * u[:out_dim, :in_dim]])


def trace_preserving_map(rng, in_dim: int, out_dim: int, scale: float = 1.0) -> QuantumMap:
    """Kraus blocks of a random isometry; effect is exactly scale^2 times the identity."""
    blocks = -(-in_dim // out_dim)  # ceil
    g = rng.normal(size=(blocks * out_dim, in_dim)) + 1j * rng.normal(
        size=(blocks * out_dim, in_dim)
    )
    q, _ = np.linalg.qr(g)
    return quantum_map([scale * q[i * out_dim : (i + 1) * out_dim, :] for i in range(blocks)])


def projective_measurement_maps(rng, d: int, branches: int) -> list:
    """Projector Kraus sets P_1..P_k with P_i summing to the identity."""
    assert 1 <= branches <= d
    u = random_unitary(rng, d)
    cuts = sorted(rng.choice(np.arange(1, d), size=branches - 1, replace=False)) + [d]
    maps = []
    start = 0
    for stop in cuts:
        basis = u[:, start:stop]
        maps.append(quantum_map([basis @ basis.conj().T]))
        start = stop
    return maps


# ---------------------------------------------------------------- random nets


def _prime_parts(n: int) -> list:
    parts = []
    for p in (2, 3):
        while n % p == 0:
            parts.append(p)
            n //= p
    if n != 1:
        raise ValueError(f"dimension {n} is not a product of 2s and 3s")
    return parts


def _cut_budget(occ: OccurrenceNet, qdim: dict, hdim: dict) -> int:
    worst = 1
    for config in occ.configurations_upto(4096):
        cut = occ.cut_of(config)
        prod = 1
        for c in cut:
            prod *= qdim[c]
        worst = max(worst, prod)
    hprod = 1
    for h in hdim.values():
        hprod *= h
    return worst * hprod


def _random_structure(rng, *, max_events: int, dmax: int, hmax: int, neg_weight: float):
    builder = OccurrenceBuilder()
    qdim = {}
    hdim = {}
    for _ in range(int(rng.integers(2, 5))):
        cid = builder.add_condition(None)
        qdim[cid] = int(rng.integers(1, dmax + 1))
    n_events = int(rng.integers(1, max_events + 1))
    for _ in range(n_events):
        pre = None
        for _attempt in range(12):
            pool = builder.conditions
            size = 1 + int(rng.random() < 0.45)
            if rng.random() < 0.5:
                consumed = [c for c in pool if builder.post_events(c)]
                first = consumed[int(rng.integers(len(consumed)))] if consumed else None
            else:
                first = None
            if first is None:
                first = pool[int(rng.integers(len(pool)))]
            cand = {first}
            while len(cand) < size:
                cand.add(pool[int(rng.integers(len(pool)))])
            if builder.is_coset(cand):
                pre = cand
                break
        if pre is None:
            continue
        roll = rng.random()
        if roll < neg_weight:
            pol = Polarity.NEGATIVE
        elif roll < neg_weight + 0.35:
            pol = Polarity.POSITIVE
        else:
            pol = Polarity.NEUTRAL
        e = builder.add_event(pre, pol)
        in_prod = 1
        for c in pre:
            in_prod *= qdim[c]
        if pol == Polarity.NEGATIVE:
            h = int(rng.integers(1, hmax + 1))
            hdim[e] = h
            parts = _prime_parts(in_prod * h) or [1]
            rng.shuffle(parts)
            for dim in parts:
                cid = builder.add_condition(e)
                qdim[cid] = dim
        else:
            hdim[e] = int(rng.integers(1, hmax + 1)) if pol == Polarity.POSITIVE else 1
            for _ in range(1 + int(rng.random() < 0.4)):
                cid = builder.add_condition(e)
                qdim[cid] = int(rng.integers(1, dmax + 1))
    return builder.to_occurrence_net(), qdim, hdim


def _co_enabled_conflict_pair(occ: OccurrenceNet):
    """A non-negative pair sharing a pre-condition and jointly enabled somewhere."""
    skel = occ.skeleton
    events = [t for t in occ.events if skel.polarity[t] != Polarity.NEGATIVE]
    cuts = [occ.cut_of(config) for config in occ.configurations_upto(4096)]
    for i, a in enumerate(events):
        for b in events[i + 1 :]:
            if not (skel.pre(a) & skel.pre(b)):
                continue
            union = skel.pre(a) | skel.pre(b)
            if any(union <= cut for cut in cuts):
                return a, b
    return None


def _assign_maps(rng, occ: OccurrenceNet, qdim, hdim, *, oblivious: bool, drop_style: str):
    skel = occ.skeleton
    ann = LocalAnnotation(qdim=dict(qdim), event_map={}, hdim=dict(hdim))
    n_events = max(1, len(occ.events))
    safe_scale = float(np.sqrt(1.0 / (2.0 * n_events)))
    failing = set()
    if drop_style == "failing":
        pair = _co_enabled_conflict_pair(occ)
        if pair is not None:
            failing.update(pair)
        else:
            candidates = [
                t for t in occ.events if skel.polarity[t] != Polarity.NEGATIVE
            ]
            if candidates:
                failing.add(candidates[int(rng.integers(len(candidates)))])
    for e in occ.events:
        pol = skel.polarity[e]
        in_dim = event_input_layout(skel, ann, e).total_dim
        out_dim = event_output_layout(skel, ann, e).total_dim
        if pol == Polarity.NEGATIVE and oblivious:
            ann.event_map[e] = identity_map(in_dim)
        elif e in failing:
            # A trace-preserving branch makes the singleton check marginal and
            # the shared-condition pair sum to twice the identity; scale the
            # lone-event fallback above one so it fails on its own.
            scale = 1.0 if len(failing) == 2 else 1.25
            ann.event_map[e] = trace_preserving_map(rng, in_dim, out_dim, scale)
        else:
            if rng.random() < 0.5:
                ann.event_map[e] = sub_unitary_map(rng, in_dim, out_dim, safe_scale)
            else:
                ann.event_map[e] = trace_preserving_map(rng, in_dim, out_dim, safe_scale)
    return ann


def random_annotated_net(
    seed,
    *,
    max_events: int = 6,
    dmax: int = 3,
    hmax: int = 2,
    oblivious: bool = True,
    drop_style: str = "mixed",
    budget: int = 1024,
):
    """A random annotated occurrence net, deterministic in the seed.

    drop_style "passing" keeps every event comfortably sub-normalized,
    "failing" plants a violation at a reachable state, "mixed" flips a coin.
    """
    rng = make_rng(seed)
    style = drop_style
    if drop_style == "mixed":
        style = "failing" if rng.random() < 0.5 else "passing"
    for dm, hm in ((dmax, hmax), (2, hmax), (2, 1), (1, 1)):
        occ, qdim, hdim = _random_structure(
            rng, max_events=max_events, dmax=dm, hmax=hm, neg_weight=0.25
        )
        if _cut_budget(occ, qdim, hdim) <= budget:
            break
    ann = _assign_maps(rng, occ, qdim, hdim, oblivious=oblivious, drop_style=style)
    issues = annotation_issues(occ.skeleton, ann)
    if issues:
        raise AssertionError(f"generator produced an ill-typed annotation: {issues}")
    return occ, ann


# ---------------------------------------------------------------- fixed builders


def measurement_net(d: int = 2, branches: int = 2, seed=0):
    """One condition measured by a complete family of projective branches."""
    rng = make_rng(seed)
    places = {0: d}
    transitions = {}
    flow = []
    next_id = 1
    maps = projective_measurement_maps(rng, d, branches)
    event_map = {}
    for m in maps:
        eid = next_id
        next_id += 1
        transitions[eid] = Polarity.NEUTRAL
        flow.append((0, eid))
        cid = next_id
        next_id += 1
        places[cid] = d
        flow.append((eid, cid))
        event_map[eid] = m
    skel = NetSkeleton(places=places.keys(), transitions=transitions, flow=flow)
    occ = OccurrenceNet(skel, c0={0})
    ann = LocalAnnotation(qdim=places, event_map=event_map, hdim={})
    return occ, ann


def double_identity_net(d: int = 2):
    """Two conflicting events that both keep everything: the canonical violation."""
    skel = NetSkeleton(
        places=[0, 1, 2],
        transitions=[(10, "0"), (11, "0")],
        flow=[(0, 10), (10, 1), (0, 11), (11, 2)],
    )
    occ = OccurrenceNet(skel, c0={0})
    ann = LocalAnnotation(
        qdim={0: d, 1: d, 2: d},
        event_map={10: identity_map(d), 11: identity_map(d)},
        hdim={},
    )
    return occ, ann


def corpus_net(index: int):
    """Deterministic mixed corpus entry: random nets, exact-zero measurement
    cliques, and planted violations, keyed by index."""
    slot = index % 10
    if slot == 7:
        d = 2 + (index // 10) % 2
        return measurement_net(d=d, branches=2, seed=index)
    if slot == 8:
        return double_identity_net(d=2 + (index // 10) % 2)
    style = ("passing", "failing", "mixed")[index % 3]
    return random_annotated_net(seed=1000 + index, drop_style=style)


# ---------------------------------------------------------------- chains and intervals


def random_chain(rng, occ: OccurrenceNet):
    """Markings of a random chain x <= y <= z of configurations."""
    configs = occ.configurations_upto(4096)
    z = configs[int(rng.integers(len(configs)))]
    subs = [c for c in configs if c <= z]
    y = subs[int(rng.integers(len(subs)))]
    subs2 = [c for c in configs if c <= y]
    x = subs2[int(rng.integers(len(subs2)))]
    return occ.cut_of(x), occ.cut_of(y), occ.cut_of(z)


def all_negative_intervals(occ: OccurrenceNet, limit: int = 64):
    """Pairs of markings whose difference consists of negative events only."""
    configs = occ.configurations_upto(4096)
    out = []
    for x in configs:
        for y in configs:
            if x < y and all(
                occ.skeleton.polarity[e] == Polarity.NEGATIVE for e in y - x
            ):
                out.append((occ.cut_of(x), occ.cut_of(y)))
                if len(out) >= limit:
                    return out
    return out


# ---------------------------------------------------------------- join instances


def random_join_instance(seed):
    """A race-free certified net with a valid drop-preserving join.

    Builds a negative cluster (clique or path of shared conditions, identity
    annotated) and a mirrored strictly positive cluster with matching H
    dimensions, optionally nested inside a larger positive cluster, plus
    optional isolated noise events.
    """
    rng = make_rng(seed)
    k = 1 + int(rng.integers(3))
    pattern = "clique" if k == 1 or rng.random() < 0.6 else "path"

    places = {}
    transitions = {}
    flow = []
    event_map_dims = {}
    hdim = {}
    counter = [0]

    def fresh():
        counter[0] += 1
        return counter[0] - 1

    def add_place(dim):
        pid = fresh()
        places[pid] = dim
        return pid

    def build_side(polarity):
        """Events e_1..e_k with the chosen conflict pattern; returns ids and pre-sets."""
        pres = []
        if pattern == "clique":
            shared = add_place(int(rng.integers(1, 3)))
            for _ in range(k):
                pre = [shared]
                if rng.random() < 0.5:
                    pre.append(add_place(int(rng.integers(1, 3))))
                pres.append(pre)
        else:
            links = [add_place(int(rng.integers(1, 3))) for _ in range(k - 1)]
            for i in range(k):
                pre = []
                if i > 0:
                    pre.append(links[i - 1])
                if i < k - 1:
                    pre.append(links[i])
                if not pre or rng.random() < 0.3:
                    pre.append(add_place(int(rng.integers(1, 3))))
                pres.append(pre)
        ids = []
        for pre in pres:
            eid = fresh()
            transitions[eid] = polarity
            for c in pre:
                flow.append((c, eid))
            ids.append(eid)
        return ids, pres

    neg_ids, neg_pres = build_side(Polarity.NEGATIVE)
    pos_ids, pos_pres = build_side(Polarity.POSITIVE)

    hs = [int(rng.integers(1, 3)) for _ in range(k)]
    extra_pos = None
    if rng.random() < 0.4:
        extra_pos = fresh()
        transitions[extra_pos] = Polarity.POSITIVE
        flow.append((pos_pres[0][0], extra_pos))
        hdim[extra_pos] = 1
        out_place = add_place(int(rng.integers(1, 3)))
        flow.append((extra_pos, out_place))
        event_map_dims[extra_pos] = (places[pos_pres[0][0]], places[out_place])
    if rng.random() < 0.3:
        src = add_place(int(rng.integers(1, 3)))
        noise = fresh()
        transitions[noise] = Polarity.NEUTRAL
        flow.append((src, noise))
        dst = add_place(places[src])
        flow.append((noise, dst))
        hdim[noise] = 1
        event_map_dims[noise] = (places[src], places[dst])

    for i in range(k):
        n, p = neg_ids[i], pos_ids[i]
        hdim[n] = hdim[p] = hs[i]
        in_n = hs[i]
        for c in neg_pres[i]:
            in_n *= places[c]
        parts = _prime_parts(in_n) or [1]
        for dim in parts:
            cid = add_place(dim)
            flow.append((n, cid))
        in_p = 1
        for c in pos_pres[i]:
            in_p *= places[c]
        out_p = hs[i]
        for _ in range(1 + int(rng.random() < 0.4)):
            cid = add_place(int(rng.integers(1, 3)))
            flow.append((p, cid))
            out_p *= places[cid]
        event_map_dims[n] = (in_n, in_n)
        event_map_dims[p] = (in_p, out_p)

    skel = NetSkeleton(places=places.keys(), transitions=transitions, flow=flow)
    m0 = frozenset(c for c in skel.places if not skel.pre(c))
    net = PetriNet(skel, m0)

    cluster_size = k + (1 if extra_pos is not None else 0)
    scale = float(np.sqrt(1.0 / (2.0 * cluster_size)))
    event_map = {}
    for t in sorted(skel.transitions):
        in_dim, out_dim = event_map_dims[t]
        if skel.polarity[t] == Polarity.NEGATIVE:
            event_map[t] = identity_map(in_dim)
        else:
            event_map[t] = sub_unitary_map(rng, in_dim, out_dim, scale)
    ann = LocalAnnotation(qdim=places, event_map=event_map, hdim=hdim)
    issues = annotation_issues(skel, ann)
    if issues:
        raise AssertionError(f"join generator produced ill-typed annotation: {issues}")

    enclosing = frozenset(pos_ids + ([extra_pos] if extra_pos is not None else []))
    spec = JoinSpec.of(dict(zip(neg_ids, pos_ids)), enclosing=enclosing)
    return net, ann, spec
