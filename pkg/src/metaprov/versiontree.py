"""Version-tree construction, edge annotation and accuracy scoring.

Three builders over the same edge-cost function (summed per-group transform
complexity):

* baseline: the upload sequence as a chain, the do-nothing reference;
* heuristic: reorder the upload sequence with the thresholded adjacent-swap
  criterion, then greedily attach each version to the cheapest already
  placed node (candidates shortlisted by matrix nearest neighbors);
* brute force: score every rooted labeled spanning tree and keep the
  global minimum (guarded by a node-count cap).

Each accepted edge carries the transform kinds per group, the summed
complexity and a semantic diff (spatial km, temporal seconds, contextual
cosine distance).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import asin, cos, radians, sin, sqrt

import numpy as np

from .embedding import (
    DEFAULT_TEXT_DIMS,
    Cluster,
    GroupSchema,
    build_clusters,
    embed_text,
    intersection_score,
)
from .errors import TreeSizeError
from .ingest import sort_by_upload
from .model import ImageServiceRecord
from .transform import (
    FitCounter,
    PairTransforms,
    TransformKind,
    identity_fit,
    nearest_neighbors,
    pair_transforms_lenient,
)
from . import arborescence

__all__ = [
    "SemanticDiff",
    "EdgeAnnotation",
    "VersionTree",
    "HeuristicParams",
    "haversine_km",
    "semantic_diff",
    "check_tree_invariants",
    "build_baseline_chain",
    "reorder_sequence",
    "build_tree_heuristic",
    "build_tree_bruteforce",
    "tree_accuracy",
    "tree_from_parent_map",
    "to_dot",
    "tree_to_document",
    "DEFAULT_N_MAX",
]

DEFAULT_N_MAX = 8

EARTH_RADIUS_KM = 6371.0


@dataclass(frozen=True)
class SemanticDiff:
    delta_spatial_km: float  # great-circle movement, >= 0
    changed_labels: tuple[str, ...]  # location label fields that changed
    delta_temporal_s: float  # capture-time shift, signed
    delta_context: float  # 1 - cosine over the text embedding, in [0, 1]


@dataclass(frozen=True)
class EdgeAnnotation:
    total_complexity: float
    kind_per_group: dict[str, str]  # group id -> linear | quadratic | missing
    diff: SemanticDiff
    forced: bool = False  # attached despite failing every feasibility cap


@dataclass(frozen=True)
class VersionTree:
    nodes: frozenset[str]
    root: str
    parent: dict[str, str]  # child -> parent; root absent
    edges: dict[str, EdgeAnnotation]  # child -> annotation


@dataclass(frozen=True)
class HeuristicParams:
    """Knobs of the reorder-and-attach builder."""

    epsilon: float = 0.25  # cluster-point distance counted as overlap
    threshold_0: float = 0.0  # initial swap threshold
    growth: float = 1.5  # geometric threshold growth per executed swap
    increment_gain: float = 0.1  # weight of the overlap-change increment
    max_passes: int = 2  # full sweeps over the sequence
    accept_complexity: float = 5.0  # per-group feasibility cap for an edge
    neighbor_k: int = 3  # nearest-neighbor shortlist size per group

    def check_bounds(self) -> list[str]:
        problems = []
        if self.epsilon <= 0:
            problems.append("epsilon must be > 0")
        if self.threshold_0 < 0:
            problems.append("threshold_0 must be >= 0")
        if self.growth <= 1:
            problems.append("growth must be > 1")
        if self.increment_gain <= 0:
            problems.append("increment_gain must be > 0")
        if self.max_passes < 1:
            problems.append("max_passes must be >= 1")
        if self.accept_complexity <= 0:
            problems.append("accept_complexity must be > 0")
        if self.neighbor_k < 1:
            problems.append("neighbor_k must be >= 1")
        return problems


# ---------------------------------------------------------------------------
# semantic diff


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in kilometers (mean Earth radius 6371 km)."""
    phi1, phi2 = radians(lat1), radians(lat2)
    dphi = radians(lat2 - lat1)
    dlam = radians(lon2 - lon1)
    h = sin(dphi / 2) ** 2 + cos(phi1) * cos(phi2) * sin(dlam / 2) ** 2
    return 2 * EARTH_RADIUS_KM * asin(sqrt(h))


def _context_text(record: ImageServiceRecord) -> str:
    c = record.contextual
    if c is None:
        return ""
    return " ".join(part for part in (c.title, c.caption, c.headline) if part)


def semantic_diff(
    parent: ImageServiceRecord,
    child: ImageServiceRecord,
    text_dims: int = DEFAULT_TEXT_DIMS,
) -> SemanticDiff:
    """How far the child moved from its parent in space, time and context.

    Absent inputs contribute zero rather than poisoning the edge: a missing
    GPS pair means no measurable movement, not infinite movement.
    """
    ps, cs = parent.spatial, child.spatial
    if ps and cs and None not in (ps.latitude, ps.longitude, cs.latitude, cs.longitude):
        spatial = haversine_km(ps.latitude, ps.longitude, cs.latitude, cs.longitude)
    else:
        spatial = 0.0
    changed = tuple(
        name
        for name in ("city", "state", "country")
        if getattr(ps, name, None) != getattr(cs, name, None)
    )

    pt, ct = parent.temporal, child.temporal
    if pt and ct and pt.datetime_original and ct.datetime_original:
        temporal = (ct.datetime_original - pt.datetime_original).total_seconds()
    else:
        temporal = 0.0

    va = embed_text(_context_text(parent), text_dims)
    vb = embed_text(_context_text(child), text_dims)
    na, nb = float(np.linalg.norm(va)), float(np.linalg.norm(vb))
    if na == 0.0 and nb == 0.0:
        context = 0.0
    elif na == 0.0 or nb == 0.0:
        context = 1.0
    else:
        context = 1.0 - float(va @ vb) / (na * nb)
    context = min(1.0, max(0.0, context))
    return SemanticDiff(spatial, changed, temporal, context)


# ---------------------------------------------------------------------------
# structural checks


def check_tree_invariants(tree: VersionTree) -> list[str]:
    """Empty list iff the tree is a single-rooted, acyclic, connected
    arborescence over its node set."""
    problems: list[str] = []
    if tree.root not in tree.nodes:
        problems.append(f"root {tree.root!r} not among nodes")
    if set(tree.parent) != tree.nodes - {tree.root}:
        problems.append("parent map must cover exactly the non-root nodes")
    for child, parent in tree.parent.items():
        if parent not in tree.nodes:
            problems.append(f"parent of {child!r} is unknown node {parent!r}")
    for node in sorted(tree.nodes):
        seen = {node}
        cursor = node
        while cursor != tree.root:
            cursor = tree.parent.get(cursor)
            if cursor is None or cursor in seen:
                problems.append(f"node {node!r} does not reach the root acyclically")
                break
            seen.add(cursor)
    for child in tree.edges:
        if child not in tree.parent:
            problems.append(f"edge annotation for non-child {child!r}")
    for child, annotation in tree.edges.items():
        if not math.isfinite(annotation.total_complexity):
            problems.append(f"edge to {child!r} has non-finite complexity")
    return problems


def tree_from_parent_map(parent_map: dict[str, str | None]) -> VersionTree:
    """Build an unannotated tree (e.g. corpus ground truth) from a child ->
    parent map in which exactly the root maps to None."""
    roots = [child for child, parent in parent_map.items() if parent is None]
    if len(roots) != 1:
        raise ValueError(f"parent map must have exactly one root, found {len(roots)}")
    parents = {c: p for c, p in parent_map.items() if p is not None}
    return VersionTree(
        nodes=frozenset(parent_map),
        root=roots[0],
        parent=parents,
        edges={},
    )


# ---------------------------------------------------------------------------
# shared builder plumbing


class _PairFitCache:
    """Memoized per-ordered-pair fits so repeated lookups cost one fit."""

    def __init__(
        self,
        clusters: list[Cluster],
        missing_penalty: float,
        counter: FitCounter | None,
    ):
        self.by_id = {c.version_id: c for c in clusters}
        self.missing_penalty = missing_penalty
        self.counter = counter
        self._memo: dict[tuple[str, str], PairTransforms] = {}

    def get(self, from_id: str, to_id: str) -> PairTransforms:
        key = (from_id, to_id)
        if key not in self._memo:
            self._memo[key] = pair_transforms_lenient(
                self.by_id[from_id],
                self.by_id[to_id],
                missing_penalty=self.missing_penalty,
                counter=self.counter,
            )
        return self._memo[key]


def _edge_annotation(
    pair: PairTransforms,
    parent_rec: ImageServiceRecord,
    child_rec: ImageServiceRecord,
    text_dims: int,
    forced: bool = False,
) -> EdgeAnnotation:
    kinds = {g: fit.kind.value for g, fit in pair.fits.items()}
    kinds.update({g: TransformKind.MISSING.value for g in pair.missing_groups})
    return EdgeAnnotation(
        total_complexity=pair.total_complexity,
        kind_per_group=dict(sorted(kinds.items())),
        diff=semantic_diff(parent_rec, child_rec, text_dims),
        forced=forced,
    )


def _assemble_tree(
    root_id: str,
    parent_map: dict[str, str],
    forced: dict[str, bool],
    cache: _PairFitCache,
    records: dict[str, ImageServiceRecord],
    text_dims: int,
) -> VersionTree:
    edges = {
        child: _edge_annotation(
            cache.get(parent, child),
            records[parent],
            records[child],
            text_dims,
            forced.get(child, False),
        )
        for child, parent in parent_map.items()
    }
    return VersionTree(
        nodes=frozenset([root_id, *parent_map]),
        root=root_id,
        parent=dict(parent_map),
        edges=edges,
    )


def _prepare(
    versions: list[ImageServiceRecord],
    schemas: list[GroupSchema] | None,
    text_dims: int | None,
    missing_penalty: float,
    counter: FitCounter | None,
):
    if not versions:
        raise ValueError("cannot build a tree from zero versions")
    ordered = sort_by_upload(versions)
    clusters = build_clusters(ordered, schemas, text_dims)
    resolved_dims = text_dims if text_dims is not None else DEFAULT_TEXT_DIMS
    cache = _PairFitCache(clusters, missing_penalty, counter)
    records = {v.id: v for v in ordered}
    return ordered, clusters, cache, records, resolved_dims


# ---------------------------------------------------------------------------
# builders


def build_baseline_chain(
    versions: list[ImageServiceRecord],
    schemas: list[GroupSchema] | None = None,
    text_dims: int | None = None,
    missing_penalty: float = 1.0,
    counter: FitCounter | None = None,
) -> VersionTree:
    """The upload sequence itself, as a chain rooted at the first upload."""
    ordered, clusters, cache, records, dims = _prepare(
        versions, schemas, text_dims, missing_penalty, counter
    )
    parent_map = {
        ordered[i].id: ordered[i - 1].id for i in range(1, len(ordered))
    }
    return _assemble_tree(ordered[0].id, parent_map, {}, cache, records, dims)


def _derivable(pair: PairTransforms, accept_complexity: float) -> bool:
    """Every shared group of the later element must be reachable from the
    earlier one with a finite fit below the feasibility cap."""
    if not pair.fits:
        return False
    return all(
        fit.feasible and fit.complexity <= accept_complexity for fit in pair.fits.values()
    )


def reorder_sequence(
    clusters: list[Cluster],
    params: HeuristicParams = HeuristicParams(),
    counter: FitCounter | None = None,
    cache: _PairFitCache | None = None,
) -> list[Cluster]:
    """Adjacent-swap passes turning the upload sequence into an edit sequence.

    A swap of the pair at (i, i+1) requires the overlap criterion
    score(C[i+1], C[i]) - score(C[i], C[i-1]) to clear the running
    threshold, and the would-be earlier element to derive the later one
    within the feasibility cap. Each executed swap tightens the threshold
    geometrically plus a term proportional to the local overlap change, so
    reordering gets strictly harder over time. Boundary pairs never swap:
    the criterion needs three consecutive clusters.
    """
    seq = list(clusters)
    if cache is None:
        cache = _PairFitCache(seq, 1.0, counter)
    threshold = params.threshold_0

    def score(x: Cluster, y: Cluster) -> float:
        return intersection_score(x, y, params.epsilon)

    for _ in range(params.max_passes):
        swapped = False
        for i in range(1, len(seq) - 1):
            dc_here = score(seq[i + 1], seq[i]) - score(seq[i], seq[i - 1])
            if dc_here <= threshold:
                continue
            pair = cache.get(seq[i + 1].version_id, seq[i].version_id)
            if not _derivable(pair, params.accept_complexity):
                continue
            dc_prev = score(seq[i], seq[i - 1]) - (
                score(seq[i - 1], seq[i - 2]) if i >= 2 else 0.0
            )
            seq[i], seq[i + 1] = seq[i + 1], seq[i]
            threshold = params.growth * threshold + params.increment_gain * abs(
                dc_here - dc_prev
            )
            swapped = True
        if not swapped:
            break
    return seq


def build_tree_heuristic(
    versions: list[ImageServiceRecord],
    schemas: list[GroupSchema] | None = None,
    params: HeuristicParams = HeuristicParams(),
    text_dims: int | None = None,
    missing_penalty: float = 1.0,
    counter: FitCounter | None = None,
) -> VersionTree:
    """Reorder, then attach each version to its cheapest placed predecessor.

    Candidates are shortlisted by nearest-neighbor rank of their per-group
    deltas against the identity (i.e. by transform simplicity); a candidate
    is feasible when every shared-group fit clears the complexity cap. A
    version failing every candidate still attaches to the overall cheapest
    node so the output stays a tree; such edges are flagged as forced.
    """
    ordered, clusters, cache, records, dims = _prepare(
        versions, schemas, text_dims, missing_penalty, counter
    )
    seq = reorder_sequence(clusters, params, cache=cache)

    parent_map: dict[str, str] = {}
    forced_flags: dict[str, bool] = {}
    placed: list[Cluster] = [seq[0]]
    for node in seq[1:]:
        fits = [(u, cache.get(u.version_id, node.version_id)) for u in placed]

        shortlist: set[str] = set()
        for group_id in sorted(node.points):
            pool = [pt.fits[group_id] for _, pt in fits if group_id in pt.fits]
            owners = {
                id(pt.fits[group_id]): u.version_id
                for u, pt in fits
                if group_id in pt.fits
            }
            if not pool:
                continue
            target = identity_fit(node.points[group_id].values.size)
            for fit in nearest_neighbors(target, pool, params.neighbor_k):
                shortlist.add(owners[id(fit)])

        best: tuple[Cluster, PairTransforms] | None = None
        for u, pt in fits:
            if u.version_id not in shortlist:
                continue
            if not _derivable(pt, params.accept_complexity):
                continue
            if best is None or pt.total_complexity < best[1].total_complexity:
                best = (u, pt)
        forced = best is None
        if forced:
            for u, pt in fits:
                if best is None or pt.total_complexity < best[1].total_complexity:
                    best = (u, pt)
        parent_map[node.version_id] = best[0].version_id
        forced_flags[node.version_id] = forced
        placed.append(node)

    return _assemble_tree(seq[0].version_id, parent_map, forced_flags, cache, records, dims)


def build_tree_bruteforce(
    versions: list[ImageServiceRecord],
    schemas: list[GroupSchema] | None = None,
    text_dims: int | None = None,
    missing_penalty: float = 1.0,
    n_max: int = DEFAULT_N_MAX,
    counter: FitCounter | None = None,
) -> VersionTree:
    """Globally minimum-weight rooted spanning tree by exhaustive enumeration.

    All ordered pairs are fitted up front, then every rooted labeled tree is
    scored. Weight ties resolve to the earliest-upload root and then the
    lexicographically smallest parent vector. Guarded by n_max because the
    candidate count grows as n^(n-1).
    """
    if len(versions) > n_max:
        raise TreeSizeError(
            f"brute force is capped at {n_max} versions, got {len(versions)}"
        )
    ordered, clusters, cache, records, dims = _prepare(
        versions, schemas, text_dims, missing_penalty, counter
    )
    n = len(ordered)
    if n == 1:
        return _assemble_tree(ordered[0].id, {}, {}, cache, records, dims)

    ids = [c.version_id for c in clusters]
    weights = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                weights[i, j] = cache.get(ids[i], ids[j]).total_complexity
    root_idx, parent_idx = arborescence.min_weight_arborescence(weights)
    parent_map = {ids[c]: ids[p] for c, p in parent_idx.items()}
    return _assemble_tree(ids[root_idx], parent_map, {}, cache, records, dims)


# ---------------------------------------------------------------------------
# scoring and output formats


def tree_accuracy(constructed: VersionTree, truth: VersionTree) -> float:
    """Fraction of nodes whose derivation matches the truth.

    Each non-root node counts as matched when its parent agrees; the root
    counts as one more node, matched iff the roots agree.
    """
    if constructed.nodes != truth.nodes:
        raise ValueError("trees must cover the same node set")
    matched = 0
    for node in constructed.nodes:
        if node == constructed.root or node == truth.root:
            matched += int(node == constructed.root and node == truth.root)
        elif constructed.parent[node] == truth.parent[node]:
            matched += 1
    return matched / len(constructed.nodes)


def to_dot(tree: VersionTree, versions: list[ImageServiceRecord]) -> str:
    """Deterministic DOT rendering; nodes in upload order, edges by child."""
    by_id = {v.id: v for v in versions}
    ordered = sort_by_upload([by_id[node] for node in tree.nodes])
    lines = ["digraph version_tree {"]
    for record in ordered:
        stamp = record.upload_time.strftime("%Y-%m-%dT%H:%M:%SZ")
        lines.append(f'  "{record.id}" [label="{record.id}\\n{stamp}"];')
    for record in ordered:
        child = record.id
        if child not in tree.parent:
            continue
        a = tree.edges[child]
        d = a.diff
        label = (
            f"w={a.total_complexity:.4f} "
            f"dS={d.delta_spatial_km:.1f}km dT={d.delta_temporal_s:+.0f}s "
            f"dC={d.delta_context:.3f}"
        )
        style = ' style=dashed' if a.forced else ""
        lines.append(f'  "{tree.parent[child]}" -> "{child}" [label="{label}"{style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def tree_to_document(tree: VersionTree) -> dict:
    """Sidecar-format document of the tree: root, parent map, annotations."""
    def diff_dict(d: SemanticDiff) -> dict:
        return {
            "delta_spatial_km": d.delta_spatial_km,
            "changed_labels": list(d.changed_labels),
            "delta_temporal_s": d.delta_temporal_s,
            "delta_context": d.delta_context,
        }

    return {
        "root": tree.root,
        "parent": {child: tree.parent[child] for child in sorted(tree.parent)},
        "edges": {
            child: {
                "total_complexity": tree.edges[child].total_complexity,
                "kind_per_group": tree.edges[child].kind_per_group,
                "forced": tree.edges[child].forced,
                "diff": diff_dict(tree.edges[child].diff),
            }
            for child in sorted(tree.edges)
        },
    }
