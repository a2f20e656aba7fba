"""Checkable conditions on annotated nets.

Two families of checks live here:

* the local checks used in practice: obliviousness of negative events and the
  drop condition evaluated per conflict cluster of enabled non-negative
  events (with a linear fast path for cliques);

* a brute-force global oracle that evaluates the alternating drop sum over
  whole families of marking intervals through the layer-graph evaluator.
  Exponential by design, it exists to cross-check the local checks at desk
  scale, not to be fast.

Every check returns a trichotomy verdict: "pass", "fail", or "inconclusive"
when an enumeration cap was hit before any violation was found. Silent
truncation would be unsound, so caps are always surfaced.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import _kernels as kernels
from .annotation import (
    GlobalOperator,
    LocalAnnotation,
    annotation_issues,
    event_input_layout,
    induced_global,
    require_well_typed,
    space_of_marking,
)
from .config import DEFAULT_DROP_TOL, DEFAULT_STATE_CAP
from .errors import EnumerationCapExceeded, IllTypedAnnotation, NotAClique
from .linalg import (
    EffectOperator,
    FactorLayout,
    choi_distance,
    effect_operator,
    identity_map,
    identity_matrix,
    kron_all,
    permute_matrix_factors,
)
from .nets import (
    NON_NEGATIVE,
    ConflictCluster,
    NetSkeleton,
    OccurrenceNet,
    PetriNet,
    Polarity,
    clusters_at,
    is_race_free,
)


@dataclass(frozen=True)
class CheckBounds:
    """Enumeration caps shared by the local checks and the oracle."""

    max_states: int = DEFAULT_STATE_CAP
    max_subsets: int = 4096
    max_family_size: int = 2
    max_families_per_state: int = 20_000


# ---------------------------------------------------------------- obliviousness


@dataclass(frozen=True)
class ObliviousnessWitness:
    event: int
    issue: str
    value: float | None = None

    def __str__(self):
        tail = f" ({self.value:.3e})" if self.value is not None else ""
        return f"event {self.event}: {self.issue}{tail}"


@dataclass(eq=False)
class ObliviousnessReport:
    passed: bool
    witnesses: list
    events_checked: int
    tol: float


def check_local_obliviousness(
    skeleton: NetSkeleton,
    ann: LocalAnnotation,
    tol: float = 1e-9,
) -> ObliviousnessReport:
    """Every negative event must carry the identity on its inputs.

    Two clauses per negative event: the output space must equal the input
    space tensored with the H space (as a dimension equation), and the map's
    Choi matrix must be that of the identity within `tol`.
    """
    require_well_typed(skeleton, ann)
    witnesses = []
    checked = 0
    for t in sorted(skeleton.transitions):
        if skeleton.polarity[t] != Polarity.NEGATIVE:
            continue
        checked += 1
        m = ann.event_map[t]
        in_dim = event_input_layout(skeleton, ann, t).total_dim
        if m.out_dim != in_dim:
            witnesses.append(
                ObliviousnessWitness(t, f"output dim {m.out_dim} != input dim {in_dim}")
            )
            continue
        dist = choi_distance(m, identity_map(in_dim))
        if dist > tol:
            witnesses.append(ObliviousnessWitness(t, "map is not the identity", dist))
    return ObliviousnessReport(
        passed=not witnesses, witnesses=witnesses, events_checked=checked, tol=tol
    )


# ---------------------------------------------------------------- cluster contexts


@dataclass(eq=False)
class ClusterExtensionContext:
    """A marking together with co-enabled non-negative events to drop-check.

    For every subset I of the events, the conditions of the marking split into
    the pre-sets consumed by I and the constant remainder K_I, so that
    K_I together with those pre-sets is exactly the marking.
    """

    skeleton: NetSkeleton
    ann: LocalAnnotation
    cut: frozenset
    cluster: ConflictCluster
    config: frozenset | None = None
    cut_layout: FactorLayout = field(init=False)
    _effects: dict = field(init=False, default_factory=dict)

    def __post_init__(self):
        self.cut_layout = space_of_marking(self.ann, self.cut)
        for e in self.cluster.events:
            if not self.skeleton.pre(e) <= self.cut:
                raise IllTypedAnnotation(f"event {e} is not enabled at {sorted(self.cut)}")
            if self.skeleton.polarity[e] == Polarity.NEGATIVE:
                raise IllTypedAnnotation(f"event {e} is negative; drop checks skip those")

    def effect(self, e: int) -> np.ndarray:
        if e not in self._effects:
            self._effects[e] = kernels.effect_sum(self.ann.event_map[e].kraus)
        return self._effects[e]

    def k_conditions(self, subset) -> frozenset:
        consumed = set()
        for e in subset:
            consumed |= self.skeleton.pre(e)
        return frozenset(self.cut - consumed)

    def compatible_subsets(self, cap: int):
        """Conflict-free subsets of the cluster, in size-then-lexicographic order."""
        adjacency = {e: set() for e in self.cluster.events}
        for a, b in self.cluster.edges:
            adjacency[a].add(b)
            adjacency[b].add(a)
        out = [()]
        level = [()]
        while level:
            nxt = []
            for subset in level:
                last = subset[-1] if subset else None
                for e in self.cluster.events:
                    if last is not None and e <= last:
                        continue
                    if any(x in adjacency[e] for x in subset):
                        continue
                    nxt.append(subset + (e,))
            out.extend(nxt)
            if len(out) > cap:
                raise EnumerationCapExceeded(
                    f"cluster {self.cluster.events} has more than {cap} compatible subsets"
                )
            level = nxt
        return out


def cluster_context(
    skeleton: NetSkeleton,
    ann: LocalAnnotation,
    marking,
    cluster: ConflictCluster,
    config=None,
) -> ClusterExtensionContext:
    return ClusterExtensionContext(
        skeleton=skeleton,
        ann=ann,
        cut=frozenset(marking),
        cluster=cluster,
        config=config,
    )


def extension_context(
    skeleton: NetSkeleton,
    ann: LocalAnnotation,
    marking,
    events: Iterable,
    config=None,
) -> ClusterExtensionContext:
    """Context over an arbitrary set of co-enabled events (not necessarily one cluster)."""
    evs = tuple(sorted(events))
    edges = frozenset(
        (a, b)
        for i, a in enumerate(evs)
        for b in evs[i + 1 :]
        if skeleton.pre(a) & skeleton.pre(b)
    )
    full = len(evs) * (len(evs) - 1) // 2
    cluster = ConflictCluster(events=evs, edges=edges, is_clique=len(edges) == full)
    return cluster_context(skeleton, ann, marking, cluster, config=config)


# ---------------------------------------------------------------- drop effects


def _embedded_term(ctx: ClusterExtensionContext, subset) -> np.ndarray:
    """effect(e1) (x) ... (x) effect(ek) (x) identity on K_I, in cut order."""
    mats = []
    grouped = []
    for e in subset:
        mats.append(ctx.effect(e))
        grouped += [(c, ctx.ann.qdim[c]) for c in sorted(ctx.skeleton.pre(e))]
    keep = sorted(ctx.k_conditions(subset))
    keep_pairs = [(c, ctx.ann.qdim[c]) for c in keep]
    keep_dim = 1
    for _, d in keep_pairs:
        keep_dim *= d
    mats.append(identity_matrix(keep_dim))
    term = kron_all(mats)
    grouped_layout = FactorLayout.of(grouped + keep_pairs)
    return permute_matrix_factors(term, grouped_layout, ctx.cut_layout)


def drop_effect(ctx: ClusterExtensionContext, *, max_subsets: int = 4096) -> EffectOperator:
    """Alternating sum over compatible subsets of the cluster's events.

    The empty subset contributes the identity on the marking's space; a
    subset I contributes the tensor of its events' effects, padded by the
    identity on the untouched conditions, with sign (-1)^|I|.
    """
    total = np.zeros((ctx.cut_layout.total_dim,) * 2, dtype=np.complex128)
    for subset in ctx.compatible_subsets(max_subsets):
        term = _embedded_term(ctx, subset)
        if len(subset) % 2:
            total -= term
        else:
            total += term
    return effect_operator(total)


def drop_effect_clique_fast(ctx: ClusterExtensionContext) -> EffectOperator:
    """Linear-time drop effect for cliques: identity minus the embedded effects."""
    if not ctx.cluster.is_clique:
        raise NotAClique(f"cluster {ctx.cluster.events} is not a clique")
    total = identity_matrix(ctx.cut_layout.total_dim)
    for e in ctx.cluster.events:
        total = total - _embedded_term(ctx, (e,))
    return effect_operator(total)


# ---------------------------------------------------------------- local drop check


@dataclass(eq=False)
class DropEntry:
    state: tuple
    cut: tuple
    cluster_events: tuple
    min_eigenvalue: float
    passed: bool
    fast_path: bool
    effect: EffectOperator
    witness_vector: np.ndarray | None = None
    witness_quadratic_form: float | None = None


@dataclass(eq=False)
class DropReport:
    verdict: str  # "pass" | "fail" | "inconclusive"
    entries: list
    failures: list
    states_checked: int
    clusters_checked: int
    capped: bool
    cap_reason: str | None
    tol: float
    mode: str  # "configurations" | "markings"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


def _min_eig_with_vector(matrix: np.ndarray):
    herm = (matrix + matrix.conj().T) / 2.0
    vals, vecs = np.linalg.eigh(herm)
    return float(vals[0]), vecs[:, 0]


def _entry_for(ctx: ClusterExtensionContext, state, tol: float, max_subsets: int) -> DropEntry:
    fast = ctx.cluster.is_clique
    eff = drop_effect_clique_fast(ctx) if fast else drop_effect(ctx, max_subsets=max_subsets)
    min_eig, vec = _min_eig_with_vector(eff.matrix)
    passed = min_eig >= -tol
    quad = None
    witness = None
    if not passed:
        witness = vec
        quad = float(np.real(vec.conj() @ eff.matrix @ vec))
    return DropEntry(
        state=tuple(sorted(state)),
        cut=tuple(sorted(ctx.cut)),
        cluster_events=ctx.cluster.events,
        min_eigenvalue=min_eig,
        passed=passed,
        fast_path=fast,
        effect=eff,
        witness_vector=witness,
        witness_quadratic_form=quad,
    )


def check_local_drop(
    target,
    ann: LocalAnnotation,
    *,
    bounds: CheckBounds = CheckBounds(),
    tol: float = DEFAULT_DROP_TOL,
    workers: int = 1,
) -> DropReport:
    """Drop condition over every enumerated state and every conflict cluster.

    Occurrence nets are checked over configurations (states are event sets,
    the cluster lives at the configuration's cut); Petri nets are checked over
    reachable markings directly.
    """
    if isinstance(target, OccurrenceNet):
        skeleton = target.skeleton
        require_well_typed(skeleton, ann)
        states, capped = target._enumerate_configurations(bounds.max_states)
        cuts = {s: target.cut_of(s) for s in states}
        mode = "configurations"
    elif isinstance(target, PetriNet):
        skeleton = target.skeleton
        require_well_typed(skeleton, ann)
        from .nets import _enumerate_markings

        states, capped = _enumerate_markings(target, bounds.max_states)
        cuts = {s: s for s in states}
        mode = "markings"
    else:
        raise TypeError(f"expected OccurrenceNet or PetriNet, got {type(target)!r}")

    cap_reason = f"state enumeration hit {bounds.max_states}" if capped else None

    def run_state(state):
        cut = cuts[state]
        local_entries = []
        local_cap = None
        for cluster in clusters_at(skeleton, cut):
            ctx = cluster_context(
                skeleton, ann, cut, cluster, config=state if mode == "configurations" else None
            )
            try:
                local_entries.append(_entry_for(ctx, state, tol, bounds.max_subsets))
            except EnumerationCapExceeded as exc:
                local_cap = str(exc)
        return local_entries, local_cap

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_state, states))
    else:
        results = [run_state(s) for s in states]

    entries = []
    for state_entries, local_cap in results:
        entries.extend(state_entries)
        if local_cap and cap_reason is None:
            cap_reason = local_cap
            capped = True
    failures = [e for e in entries if not e.passed]
    if failures:
        verdict = "fail"
    elif capped:
        verdict = "inconclusive"
    else:
        verdict = "pass"
    return DropReport(
        verdict=verdict,
        entries=entries,
        failures=failures,
        states_checked=len(states),
        clusters_checked=len(entries),
        capped=capped,
        cap_reason=cap_reason,
        tol=tol,
        mode=mode,
    )


# ---------------------------------------------------------------- global oracle


def _validate_family(o: OccurrenceNet, x: frozenset, family) -> None:
    for y in family:
        if not x <= y:
            raise IllTypedAnnotation(f"family member {sorted(y)} does not extend {sorted(x)}")
        for e in y - x:
            if o.skeleton.polarity[e] == Polarity.NEGATIVE:
                raise IllTypedAnnotation(f"family member adds negative event {e}")


def _interval_effect(o, ann, x, y, memo) -> np.ndarray:
    key = (x, y)
    if key not in memo:
        op = induced_global(o, ann, o.cut_of(x), o.cut_of(y))
        memo[key] = kernels.effect_sum(op.map.kraus)
    return memo[key]


def drop_effect_direct(
    o: OccurrenceNet,
    ann: LocalAnnotation,
    x,
    family,
    memo: dict | None = None,
) -> EffectOperator:
    """Alternating drop sum evaluated through whole-interval operators.

    Family members must extend `x` by non-negative events; members (or unions)
    that fail to be configurations simply contribute no terms. This is the
    evaluation path the oracle trusts; it shares nothing with the per-cluster
    formula beyond the underlying linear algebra.
    """
    x = o.check_configuration(x)
    family = tuple(frozenset(y) for y in family)
    _validate_family(o, x, family)
    if memo is None:
        memo = {}
    dim = space_of_marking(ann, o.cut_of(x)).total_dim
    total = np.zeros((dim, dim), dtype=np.complex128)
    n = len(family)
    for mask in range(1 << n):
        union = set(x)
        for i in range(n):
            if mask & (1 << i):
                union |= family[i]
        union = frozenset(union)
        if not o.is_configuration(union):
            continue
        term = _interval_effect(o, ann, x, union, memo)
        if bin(mask).count("1") % 2:
            total -= term
        else:
            total += term
    return effect_operator(total)


def drop_effect_recursive(
    o: OccurrenceNet,
    ann: LocalAnnotation,
    x,
    family,
    *,
    depth_cap: int = 16,
) -> EffectOperator:
    """Drop sum by peeling one family member at a time.

    d[x; y1..yn] subtracts from d[x; y1..y(n-1)] the inner drop at yn,
    transported back through the interval operator of [x; yn] and traced over
    the positive H slots produced along the way.
    """
    x = o.check_configuration(x)
    family = tuple(frozenset(y) for y in family)
    _validate_family(o, x, family)
    if len(family) > depth_cap:
        raise EnumerationCapExceeded(f"recursion over {len(family)} members exceeds {depth_cap}")
    dim = space_of_marking(ann, o.cut_of(x)).total_dim
    if not family:
        return effect_operator(identity_matrix(dim))
    rest, y_n = family[:-1], family[-1]
    d_rest = drop_effect_recursive(o, ann, x, rest, depth_cap=depth_cap)
    if not o.is_configuration(y_n):
        return d_rest
    op = induced_global(o, ann, o.cut_of(x), o.cut_of(y_n))
    inner_family = tuple(y | y_n for y in rest)
    d_inner = drop_effect_recursive(o, ann, y_n, inner_family, depth_cap=depth_cap)
    hout_dim = 1
    for fid, d in op.out_layout.factors:
        if isinstance(fid, tuple):
            hout_dim *= d
    mid = kernels.kron(d_inner.matrix, identity_matrix(hout_dim))
    term = kernels.weighted_effect(op.map.kraus, mid)
    return effect_operator(d_rest.matrix - term)


@dataclass(eq=False)
class OracleFailure:
    config: tuple
    family: tuple
    min_eigenvalue: float


@dataclass(eq=False)
class OracleReport:
    verdict: str
    failures: list
    states_checked: int
    families_checked: int
    capped: bool
    cap_reason: str | None
    tol: float

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


def global_drop_oracle(
    o: OccurrenceNet,
    ann: LocalAnnotation,
    *,
    bounds: CheckBounds = CheckBounds(),
    tol: float = DEFAULT_DROP_TOL,
) -> OracleReport:
    """Brute-force drop condition over families of non-negative extensions.

    For every configuration, checks every subset of its single extensions
    (that is the family shape the local check must match) plus every family
    of at most `bounds.max_family_size` arbitrary non-negative extensions.
    """
    require_well_typed(o.skeleton, ann)
    states, capped = o._enumerate_configurations(bounds.max_states)
    cap_reason = f"state enumeration hit {bounds.max_states}" if capped else None
    config_pool = states
    failures = []
    families_checked = 0
    for x in config_pool:
        ups = [
            y
            for y in config_pool
            if x < y
            and all(o.skeleton.polarity[e] != Polarity.NEGATIVE for e in y - x)
        ]
        singles = [
            frozenset(x | {e})
            for e in o.single_extensions(x)
            if o.skeleton.polarity[e] != Polarity.NEGATIVE
        ]
        families = []
        seen = set()
        n = len(singles)
        if (1 << n) > bounds.max_families_per_state:
            cap_reason = f"{n} single extensions at one configuration"
            capped = True
            continue
        for mask in range(1, 1 << n):
            fam = tuple(singles[i] for i in range(n) if mask & (1 << i))
            key = frozenset(fam)
            if key not in seen:
                seen.add(key)
                families.append(fam)
        from itertools import combinations

        for size in range(1, bounds.max_family_size + 1):
            for combo in combinations(ups, size):
                key = frozenset(combo)
                if key not in seen:
                    seen.add(key)
                    families.append(tuple(combo))
        if len(families) > bounds.max_families_per_state:
            cap_reason = f"{len(families)} families at one configuration"
            capped = True
            families = families[: bounds.max_families_per_state]
        memo = {}
        for fam in families:
            families_checked += 1
            eff = drop_effect_direct(o, ann, x, fam, memo)
            min_eig, _ = _min_eig_with_vector(eff.matrix)
            if min_eig < -tol:
                failures.append(
                    OracleFailure(
                        config=tuple(sorted(x)),
                        family=tuple(tuple(sorted(y)) for y in fam),
                        min_eigenvalue=min_eig,
                    )
                )
    if failures:
        verdict = "fail"
    elif capped:
        verdict = "inconclusive"
    else:
        verdict = "pass"
    return OracleReport(
        verdict=verdict,
        failures=failures,
        states_checked=len(states),
        families_checked=families_checked,
        capped=capped,
        cap_reason=cap_reason,
        tol=tol,
    )


# ---------------------------------------------------------------- certification


@dataclass(eq=False)
class CertificationReport:
    certified: bool
    conclusive: bool
    obliviousness: ObliviousnessReport
    drop: DropReport
    race_free: bool
    tol: float
    bounds: CheckBounds
    corroboration: dict | None = None


def certify_qpn(
    net,
    ann: LocalAnnotation,
    *,
    bounds: CheckBounds = CheckBounds(),
    tol: float = DEFAULT_DROP_TOL,
    corroborate=None,
) -> CertificationReport:
    """Certify an annotated net: obliviousness plus the local drop condition.

    Race-freeness is reported on the side (joins need it, certification does
    not). Pass an UnfoldLimit as `corroborate` to additionally unfold the net,
    transport the annotation to the prefix, and re-run the drop check there.
    """
    skeleton = net.skeleton
    obliv = check_local_obliviousness(skeleton, ann, tol)
    drop = check_local_drop(net, ann, bounds=bounds, tol=tol)
    race = is_race_free(skeleton)
    corroboration = None
    if corroborate is not None:
        from .unfolding import lift_annotation, unfold, validate_branching_process

        base = net if isinstance(net, PetriNet) else PetriNet(net.skeleton, net.c0)
        bp = unfold(base, corroborate)
        lifted = lift_annotation(bp, ann)
        prefix_obliv = check_local_obliviousness(bp.occ.skeleton, lifted, tol)
        prefix_drop = check_local_drop(bp.occ, lifted, bounds=bounds, tol=tol)
        corroboration = {
            "prefix_events": len(bp.event_label),
            "prefix_complete": bp.complete,
            "prefix_valid": validate_branching_process(base, bp).ok,
            "obliviousness": prefix_obliv,
            "drop": prefix_drop,
        }
    return CertificationReport(
        certified=obliv.passed and drop.verdict == "pass",
        conclusive=drop.verdict != "inconclusive",
        obliviousness=obliv,
        drop=drop,
        race_free=race,
        tol=tol,
        bounds=bounds,
        corroboration=corroboration,
    )
