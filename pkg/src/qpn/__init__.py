"""Quantum Petri nets: safe nets carrying local quantum valuations.

The package builds occurrence nets and Petri nets whose conditions carry
finite-dimensional spaces and whose events carry completely positive
trace-non-increasing maps, evaluates the induced global operators, verifies
the local obliviousness and drop conditions (with a brute-force global
oracle for cross-checking), and composes certified nets in parallel or by
joining complementary events.
"""

from .annotation import (
    GlobalOperator,
    LayerGraph,
    LocalAnnotation,
    annotation_issues,
    build_layer_graph,
    compose_global,
    evaluate_diagram,
    induced_global,
    space_of_marking,
)
from .composition import (
    JoinSpec,
    drop_preserving_join,
    parallel_compose,
    single_join,
    validate_drop_preserving,
)
from .linalg import (
    CptniVerdict,
    EffectOperator,
    FactorLayout,
    QuantumMap,
    apply_map,
    choi_distance,
    compose,
    effect_of,
    identity_map,
    is_cptni,
    is_psd,
    loewner_geq,
    map_from_choi,
    partial_trace,
    permute_factors,
    quantum_map,
    tensor,
)
from .nets import (
    ConflictCluster,
    Marking,
    MarkingInterval,
    NetSkeleton,
    OccurrenceNet,
    PetriNet,
    Polarity,
    clusters_at,
    conflict_clusters,
    enabled,
    fire,
    interval,
    is_race_free,
    minimal_conflicts,
    reachable_markings,
    restrict,
    skeleton_clusters,
    validate_occurrence_net,
)
from .unfolding import (
    BranchingProcess,
    UnfoldLimit,
    lift_annotation,
    unfold,
    validate_branching_process,
)
from .verification import (
    CertificationReport,
    CheckBounds,
    DropReport,
    certify_qpn,
    check_local_drop,
    check_local_obliviousness,
    cluster_context,
    drop_effect,
    drop_effect_clique_fast,
    drop_effect_direct,
    drop_effect_recursive,
    extension_context,
    global_drop_oracle,
)

__version__ = "0.1.0"
