"""Metadata-only change detection and version trees for crowdsourced images.

The pipeline: parse or canonicalize metadata into immutable records, flag
internal inconsistencies across related attribute groups, embed each
version's groups as normalized vectors, fit identity-anchored
transformation matrices between versions, and reconstruct the provenance
tree whose edges carry transform complexity and semantic diffs.
"""

from .consistency import (
    CapabilityTable,
    GroupFinding,
    GroupStatus,
    InconsistencyReport,
    RuleGroup,
    Tolerances,
    compute_exposure_value,
    evaluate_all,
)
from .embedding import Cluster, build_clusters, embed_text, intersection_score, normalize
from .errors import MetaprovError
from .evalgen import CorpusSpec, MutationOp, OpKind, generate_corpus, random_spec, run_experiment
from .ingest import LocalCorpusProvider, VersionQuery, VersionSet, discover_versions, sort_by_upload
from .model import (
    CameraAttrs,
    ContextualAttrs,
    EnvironmentAttrs,
    FunctionalAttrs,
    ImageServiceRecord,
    SpatialAttrs,
    TemporalAttrs,
    ValidationViolation,
    validate,
)
from .sidecar import dump_corpus, load_corpus, parse_corpus, parse_record, serialize_record
from .tags import canonicalize_tags
from .transform import (
    FitCounter,
    TransformFit,
    choose_transform,
    fit_linear,
    fit_quadratic,
    frobenius_distance,
    nearest_neighbors,
    pair_transforms,
)
from .versiontree import (
    HeuristicParams,
    SemanticDiff,
    VersionTree,
    build_baseline_chain,
    build_tree_bruteforce,
    build_tree_heuristic,
    haversine_km,
    reorder_sequence,
    semantic_diff,
    tree_accuracy,
)

__version__ = "0.1.0"
