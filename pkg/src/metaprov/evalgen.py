"""Deterministic synthetic corpora and the evaluation harness.

Versions are derived from a shipped, internally consistent seed record by a
closed catalog of mutation operators (timestamp shifts, GPS moves, context
rewrites, camera swaps, exposure edits, timezone changes). Every operator
maps to the consistency rule group it trips, giving full ground-truth
control. The harness generates instances, builds all three trees per
instance and reports accuracy plus fit-count (the hardware-independent
run-time proxy) per strategy.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import enum
import json
import math
import random
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

from .arborescence import prufer_decode, rooted_parents_from_edges
from .consistency import RuleGroup
from .embedding import GroupSchema
from .errors import GenerationError, MetaprovError
from .model import EnvironmentAttrs, ImageServiceRecord, validate
from .sidecar import record_from_obj, record_to_dict
from .transform import FitCounter
from .versiontree import (
    DEFAULT_N_MAX,
    HeuristicParams,
    VersionTree,
    build_baseline_chain,
    build_tree_bruteforce,
    build_tree_heuristic,
    tree_accuracy,
    tree_from_parent_map,
)

__all__ = [
    "OpKind",
    "MutationOp",
    "CorpusSpec",
    "OP_GROUP_MAP",
    "OP_EXEMPLARS",
    "MAGNITUDE_BOUNDS",
    "CONTEXT_TEMPLATES",
    "CAMERA_SWAP_TARGETS",
    "apply_op",
    "generate_corpus",
    "random_spec",
    "load_seed_record",
    "corpus_spec_from_obj",
    "corpus_spec_to_dict",
    "StrategySummary",
    "InstanceRow",
    "EvalResult",
    "run_experiment",
    "eval_report_document",
    "eval_rows_csv",
    "STRATEGIES",
]

_UTC = dt.timezone.utc

UPLOAD_SPACING_S = 1800  # gap between consecutive uploads in generated corpora


class OpKind(enum.Enum):
    SHIFT_DATETIME = "shift_datetime"
    MOVE_GPS = "move_gps"
    REWRITE_CONTEXT = "rewrite_context"
    SWAP_CAMERA_MODEL = "swap_camera_model"
    PERTURB_EXPOSURE = "perturb_exposure"
    DESYNC_SHUTTER_EXPOSURE = "desync_shutter_exposure"
    CHANGE_TIMEZONE = "change_timezone"


@dataclass(frozen=True)
class MutationOp:
    kind: OpKind
    magnitude: float  # kind-specific; see MAGNITUDE_BOUNDS


# Which rule group each operator, applied alone to the seed, flips.
OP_GROUP_MAP: dict[OpKind, RuleGroup] = {
    OpKind.SHIFT_DATETIME: RuleGroup.G1_TIMESTAMPS,
    OpKind.MOVE_GPS: RuleGroup.G6_GPS_TIMEZONE,
    OpKind.REWRITE_CONTEXT: RuleGroup.G8_ENVIRONMENT,
    OpKind.SWAP_CAMERA_MODEL: RuleGroup.G2_CAPABILITIES,
    OpKind.PERTURB_EXPOSURE: RuleGroup.G4_EXPOSURE_TRIANGLE,
    OpKind.DESYNC_SHUTTER_EXPOSURE: RuleGroup.G3_EXPOSURE_VALUE,
    OpKind.CHANGE_TIMEZONE: RuleGroup.G6_GPS_TIMEZONE,
}

# Canonical exemplar magnitude per kind (used by tests and documentation).
OP_EXEMPLARS: dict[OpKind, float] = {
    OpKind.SHIFT_DATETIME: 86400.0,
    OpKind.MOVE_GPS: 90.0,
    OpKind.REWRITE_CONTEXT: 0.0,
    OpKind.SWAP_CAMERA_MODEL: 0.0,
    OpKind.PERTURB_EXPOSURE: 9.0,
    OpKind.DESYNC_SHUTTER_EXPOSURE: 3.0,
    OpKind.CHANGE_TIMEZONE: 480.0,
}

# Documented per-kind magnitude bounds (inclusive), zero excluded where the
# operator would otherwise be a no-op.
MAGNITUDE_BOUNDS: dict[OpKind, tuple[float, float, bool]] = {
    OpKind.SHIFT_DATETIME: (-2_592_000.0, 2_592_000.0, False),
    OpKind.MOVE_GPS: (-180.0, 180.0, False),
    OpKind.REWRITE_CONTEXT: (0.0, 63.0, True),
    OpKind.SWAP_CAMERA_MODEL: (0.0, 63.0, True),
    OpKind.PERTURB_EXPOSURE: (-16.0, 16.0, False),
    OpKind.DESYNC_SHUTTER_EXPOSURE: (-10.0, 10.0, False),
    OpKind.CHANGE_TIMEZONE: (-1680.0, 1680.0, False),
}

# Replacement narratives for context rewrites. The ambiance label is part of
# the claimed story and lands in the weather field.
CONTEXT_TEMPLATES: list[dict[str, str]] = [
    {
        "title": "Missing airliner spotted off the coast",
        "caption": "Wide shot of a jet floating in open water while rescue boats circle",
        "headline": "Search teams converge at dawn",
        "weather": "overcast",
    },
    {
        "title": "Earthquake survivors huddle together",
        "caption": "Two children wrapped in blankets outside collapsed masonry",
        "headline": "Relief effort enters its third day",
        "weather": "rainy",
    },
    {
        "title": "Camel resting at the roadside market",
        "caption": "A camel folds its legs beneath itself near the spice stalls",
        "headline": "Desert heat slows the caravan",
        "weather": "hazy",
    },
    {
        "title": "Night protest fills the square",
        "caption": "Crowds with lanterns gather under monsoon clouds",
        "headline": "City braces for a tense week",
        "weather": "stormy",
    },
    {
        "title": "Flood waters reach the old bridge",
        "caption": "The river bursts its banks after a week of rain",
        "headline": "Evacuations begin downstream",
        "weather": "rainy",
    },
    {
        "title": "Blizzard strands commuters overnight",
        "caption": "Cars buried along the highway shoulder in drifting snow",
        "headline": "Coldest night in a decade",
        "weather": "snowy",
    },
]

# (make, model) pairs from the shipped capability table whose envelopes
# conflict with the seed's full-frame settings.
CAMERA_SWAP_TARGETS: list[tuple[str, str]] = [
    ("Fujifilm", "X100V"),
    ("Apple", "iPhone 12"),
    ("GoPro", "HERO9 Black"),
    ("Ricoh", "GR III"),
    ("Samsung", "Galaxy S21"),
    ("Leica", "Q2"),
]


def load_seed_record() -> ImageServiceRecord:
    data = resources.files("metaprov.data").joinpath("seed_record.json")
    return record_from_obj(json.loads(data.read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# operator application


def _check_magnitude(op: MutationOp) -> None:
    lo, hi, zero_ok = MAGNITUDE_BOUNDS[op.kind]
    if not (lo <= op.magnitude <= hi) or (not zero_ok and op.magnitude == 0):
        raise GenerationError(
            f"{op.kind.value} magnitude {op.magnitude} outside documented bounds"
        )


def _require(condition: bool, op: MutationOp, what: str) -> None:
    if not condition:
        raise GenerationError(f"{op.kind.value} requires {what}")


def _wrap_longitude(lon: float) -> float:
    return (lon + 180.0) % 360.0 - 180.0


def apply_op(record: ImageServiceRecord, op: MutationOp) -> ImageServiceRecord:
    """Apply one mutation, returning a new record. Operators keep the record
    valid; an operator whose inputs are absent raises GenerationError."""
    _check_magnitude(op)
    kind = op.kind

    if kind is OpKind.SHIFT_DATETIME:
        t = record.temporal
        _require(t is not None and t.datetime_original is not None, op, "temporal.datetime_original")
        shifted = t.datetime_original + dt.timedelta(seconds=op.magnitude)
        return dataclasses.replace(
            record, temporal=dataclasses.replace(t, datetime_original=shifted)
        )

    if kind is OpKind.MOVE_GPS:
        s = record.spatial
        _require(s is not None and s.longitude is not None, op, "spatial.longitude")
        moved = _wrap_longitude(s.longitude + op.magnitude)
        return dataclasses.replace(record, spatial=dataclasses.replace(s, longitude=moved))

    if kind is OpKind.REWRITE_CONTEXT:
        c = record.contextual
        _require(c is not None, op, "contextual attributes")
        template = CONTEXT_TEMPLATES[int(op.magnitude) % len(CONTEXT_TEMPLATES)]
        env = record.environment or EnvironmentAttrs()
        return dataclasses.replace(
            record,
            contextual=dataclasses.replace(
                c,
                title=template["title"],
                caption=template["caption"],
                headline=template["headline"],
            ),
            environment=dataclasses.replace(env, weather=template["weather"]),
        )

    if kind is OpKind.SWAP_CAMERA_MODEL:
        cam = record.camera
        _require(cam is not None and cam.make is not None and cam.model is not None, op, "camera.make/model")
        make, model = CAMERA_SWAP_TARGETS[int(op.magnitude) % len(CAMERA_SWAP_TARGETS)]
        return dataclasses.replace(
            record, camera=dataclasses.replace(cam, make=make, model=model)
        )

    if kind is OpKind.PERTURB_EXPOSURE:
        cam = record.camera
        _require(
            cam is not None and cam.aperture is not None and cam.exposure_time is not None,
            op,
            "camera.aperture and camera.exposure_time",
        )
        new_time = cam.exposure_time / (2.0**op.magnitude)
        updates: dict[str, Any] = {"exposure_time": new_time}
        if cam.shutter_speed is not None:
            updates["shutter_speed"] = math.log2(1.0 / new_time)
        if cam.exposure_value is not None:
            updates["exposure_value"] = math.log2(cam.aperture**2 / new_time)
        return dataclasses.replace(record, camera=dataclasses.replace(cam, **updates))

    if kind is OpKind.DESYNC_SHUTTER_EXPOSURE:
        cam = record.camera
        _require(cam is not None and cam.exposure_time is not None, op, "camera.exposure_time")
        new_time = cam.exposure_time * (2.0**op.magnitude)
        # shutter_speed and exposure_value deliberately stay stale
        return dataclasses.replace(
            record, camera=dataclasses.replace(cam, exposure_time=new_time)
        )

    if kind is OpKind.CHANGE_TIMEZONE:
        t = record.temporal
        _require(t is not None and t.timezone_offset is not None, op, "temporal.timezone_offset")
        moved = int(t.timezone_offset + op.magnitude)
        moved = max(-14 * 60, min(14 * 60, moved))
        return dataclasses.replace(
            record, temporal=dataclasses.replace(t, timezone_offset=moved)
        )

    raise GenerationError(f"unknown operator kind {kind!r}")


# ---------------------------------------------------------------------------
# corpus specifications and generation


@dataclass(frozen=True)
class CorpusSpec:
    seed_record: ImageServiceRecord
    tree_shape: dict[str, str | None]  # child -> parent; root maps to None
    ops_per_edge: dict[str, list[MutationOp]]  # keyed by child node
    rng_seed: int
    upload_order: list[str]  # permutation of the nodes; may invert tree order


def _check_spec(spec: CorpusSpec) -> VersionTree:
    truth = tree_from_parent_map(spec.tree_shape)  # validates the tree shape
    if sorted(spec.upload_order) != sorted(spec.tree_shape):
        raise GenerationError("upload_order must be a permutation of the tree nodes")
    unknown = set(spec.ops_per_edge) - set(spec.tree_shape)
    if unknown:
        raise GenerationError(f"ops_per_edge references unknown nodes: {sorted(unknown)}")
    return truth


def generate_corpus(spec: CorpusSpec) -> tuple[list[ImageServiceRecord], VersionTree]:
    """Materialize a corpus: the root is the seed, every child is its parent
    with the edge's operators applied in order, upload times follow
    upload_order with strictly increasing stamps."""
    truth = _check_spec(spec)
    base = spec.seed_record.upload_time

    records: dict[str, ImageServiceRecord] = {}
    pending = dict(spec.tree_shape)
    while pending:
        progressed = False
        for child in sorted(pending):
            parent = pending[child]
            if parent is None:
                records[child] = dataclasses.replace(spec.seed_record, id=child)
            elif parent in records:
                rec = dataclasses.replace(records[parent], id=child)
                for op in spec.ops_per_edge.get(child, []):
                    try:
                        rec = apply_op(rec, op)
                    except GenerationError as exc:
                        raise GenerationError(f"edge {parent}->{child}: {exc}") from exc
                records[child] = rec
            else:
                continue
            del pending[child]
            progressed = True
        if not progressed:  # unreachable given _check_spec, kept as a guard
            raise GenerationError("tree_shape is not connected")

    versions: list[ImageServiceRecord] = []
    for position, node in enumerate(spec.upload_order):
        stamp = base + dt.timedelta(seconds=(position + 1) * UPLOAD_SPACING_S)
        versions.append(dataclasses.replace(records[node], upload_time=stamp))

    for version in versions:
        problems = validate(version)
        if problems:
            raise GenerationError(
                f"generated version {version.id!r} violates invariants: {problems}"
            )
    return versions, truth


def _sample_op(kind: OpKind, rng: random.Random) -> MutationOp:
    if kind is OpKind.SHIFT_DATETIME:
        return MutationOp(kind, float(rng.randint(3_600, 172_800)))
    if kind is OpKind.MOVE_GPS:
        return MutationOp(kind, round(rng.uniform(50.0, 120.0), 4))
    if kind is OpKind.REWRITE_CONTEXT:
        return MutationOp(kind, float(rng.randrange(len(CONTEXT_TEMPLATES))))
    if kind is OpKind.SWAP_CAMERA_MODEL:
        return MutationOp(kind, float(rng.randrange(len(CAMERA_SWAP_TARGETS))))
    if kind is OpKind.PERTURB_EXPOSURE:
        return MutationOp(kind, round(rng.uniform(8.0, 11.0), 4))
    if kind is OpKind.DESYNC_SHUTTER_EXPOSURE:
        return MutationOp(kind, round(rng.uniform(2.0, 5.0), 4))
    if kind is OpKind.CHANGE_TIMEZONE:
        return MutationOp(kind, float(rng.choice([-1, 1]) * rng.randrange(300, 601, 30)))
    raise GenerationError(f"unknown operator kind {kind!r}")


def random_spec(
    n_nodes: int,
    n_ops_per_edge: int = 1,
    rng_seed: int = 0,
    seed_record: ImageServiceRecord | None = None,
    inversion_rate: float = 0.25,
) -> CorpusSpec:
    """Uniform rooted labeled tree (via a uniform Prufer sequence and root),
    random per-edge operators, and an upload order that is a random
    linearization of the tree with occasional adjacent inversions.

    The inversion rate plants upload-before-parent cases, the situations
    the reordering heuristic exists to repair. Deterministic in rng_seed.
    """
    if n_nodes < 1:
        raise GenerationError("n_nodes must be >= 1")
    rng = random.Random(rng_seed)
    seed = seed_record if seed_record is not None else load_seed_record()
    names = [f"v{i + 1}" for i in range(n_nodes)]

    if n_nodes == 1:
        return CorpusSpec(seed, {names[0]: None}, {}, rng_seed, [names[0]])

    seq = [rng.randrange(n_nodes) for _ in range(n_nodes - 2)]
    edges = prufer_decode(seq, n_nodes)
    root = rng.randrange(n_nodes)
    parent_idx = rooted_parents_from_edges(edges, root, n_nodes)
    tree_shape: dict[str, str | None] = {names[root]: None}
    for child, parent in sorted(parent_idx.items()):
        tree_shape[names[child]] = names[parent]

    kinds = list(OpKind)
    ops_per_edge: dict[str, list[MutationOp]] = {}
    for child in sorted(parent_idx):
        chosen = rng.sample(kinds, k=min(n_ops_per_edge, len(kinds)))
        ops_per_edge[names[child]] = [_sample_op(kind, rng) for kind in chosen]

    children_of: dict[int, list[int]] = {i: [] for i in range(n_nodes)}
    for child, parent in parent_idx.items():
        children_of[parent].append(child)
    available = [root]
    order_idx: list[int] = []
    while available:
        node = available.pop(rng.randrange(len(available)))
        order_idx.append(node)
        available.extend(sorted(children_of[node]))
    for i in range(1, n_nodes):
        if rng.random() < inversion_rate:
            order_idx[i - 1], order_idx[i] = order_idx[i], order_idx[i - 1]

    return CorpusSpec(
        seed_record=seed,
        tree_shape=tree_shape,
        ops_per_edge=ops_per_edge,
        rng_seed=rng_seed,
        upload_order=[names[i] for i in order_idx],
    )


# ---------------------------------------------------------------------------
# spec documents (CLI interchange)


def corpus_spec_from_obj(obj: dict, seed_record: ImageServiceRecord | None = None) -> CorpusSpec:
    if "seed_record" in obj:
        seed = record_from_obj(obj["seed_record"])
    elif seed_record is not None:
        seed = seed_record
    else:
        seed = load_seed_record()
    ops = {
        child: [MutationOp(OpKind(o["kind"]), float(o["magnitude"])) for o in op_list]
        for child, op_list in obj.get("ops_per_edge", {}).items()
    }
    return CorpusSpec(
        seed_record=seed,
        tree_shape=dict(obj["tree_shape"]),
        ops_per_edge=ops,
        rng_seed=int(obj.get("rng_seed", 0)),
        upload_order=list(obj["upload_order"]),
    )


def corpus_spec_to_dict(spec: CorpusSpec) -> dict:
    return {
        "seed_record": record_to_dict(spec.seed_record),
        "tree_shape": {k: spec.tree_shape[k] for k in sorted(spec.tree_shape)},
        "ops_per_edge": {
            child: [{"kind": op.kind.value, "magnitude": op.magnitude} for op in ops]
            for child, ops in sorted(spec.ops_per_edge.items())
        },
        "rng_seed": spec.rng_seed,
        "upload_order": list(spec.upload_order),
    }


# ---------------------------------------------------------------------------
# experiment harness

STRATEGIES = ("baseline", "heuristic", "bruteforce")


@dataclass
class StrategySummary:
    mean_accuracy: float
    total_fit_count: int
    total_wall_ns: int


@dataclass(frozen=True)
class InstanceRow:
    index: int
    n_nodes: int
    accuracy: dict[str, float]
    fit_count: dict[str, int]
    wall_ns: dict[str, int]


@dataclass
class EvalResult:
    instance_count: int
    n_range: tuple[int, int]
    rng_seed: int
    strategies: dict[str, StrategySummary]
    rows: list[InstanceRow]
    failures: list[str]


def _build_for(
    strategy: str,
    versions: list[ImageServiceRecord],
    schemas: list[GroupSchema] | None,
    params: HeuristicParams,
    n_max: int,
    counter: FitCounter,
) -> VersionTree:
    if strategy == "baseline":
        return build_baseline_chain(versions, schemas, counter=counter)
    if strategy == "heuristic":
        return build_tree_heuristic(versions, schemas, params=params, counter=counter)
    if strategy == "bruteforce":
        return build_tree_bruteforce(versions, schemas, n_max=n_max, counter=counter)
    raise ValueError(f"unknown strategy {strategy!r}")


def run_experiment(
    instance_count: int,
    n_range: tuple[int, int] = (5, 8),
    params: HeuristicParams = HeuristicParams(),
    rng_seed: int = 0,
    n_ops_per_edge: int = 1,
    inversion_rate: float = 0.25,
    seed_record: ImageServiceRecord | None = None,
    schemas: list[GroupSchema] | None = None,
    strategies: tuple[str, ...] = STRATEGIES,
    n_max: int = DEFAULT_N_MAX,
) -> EvalResult:
    """Generate instances and score every strategy on each of them.

    Instances draw their node count uniformly from n_range and use rng
    streams derived from (rng_seed, instance index), so results do not
    depend on execution order. Per-instance failures are recorded and do
    not abort the run.
    """
    lo, hi = n_range
    if "bruteforce" in strategies and hi > n_max:
        raise ValueError(f"n_range upper limit {hi} exceeds the brute-force cap {n_max}")
    seed = seed_record if seed_record is not None else load_seed_record()

    rows: list[InstanceRow] = []
    failures: list[str] = []
    for index in range(instance_count):
        inst_rng = random.Random(rng_seed * 1_000_003 + index)
        n_nodes = inst_rng.randint(lo, hi)
        spec_seed = inst_rng.randrange(2**62)
        try:
            spec = random_spec(
                n_nodes,
                n_ops_per_edge=n_ops_per_edge,
                rng_seed=spec_seed,
                seed_record=seed,
                inversion_rate=inversion_rate,
            )
            versions, truth = generate_corpus(spec)
            accuracy: dict[str, float] = {}
            fit_count: dict[str, int] = {}
            wall_ns: dict[str, int] = {}
            for strategy in strategies:
                counter = FitCounter()
                t0 = time.perf_counter_ns()
                tree = _build_for(strategy, versions, schemas, params, n_max, counter)
                wall_ns[strategy] = time.perf_counter_ns() - t0
                accuracy[strategy] = tree_accuracy(tree, truth)
                fit_count[strategy] = counter.count
            rows.append(InstanceRow(index, n_nodes, accuracy, fit_count, wall_ns))
        except MetaprovError as exc:
            failures.append(f"instance {index}: {exc}")

    summaries: dict[str, StrategySummary] = {}
    for strategy in strategies:
        accs = [r.accuracy[strategy] for r in rows]
        summaries[strategy] = StrategySummary(
            mean_accuracy=sum(accs) / len(accs) if accs else 0.0,
            total_fit_count=sum(r.fit_count[strategy] for r in rows),
            total_wall_ns=sum(r.wall_ns[strategy] for r in rows),
        )
    return EvalResult(
        instance_count=instance_count,
        n_range=(lo, hi),
        rng_seed=rng_seed,
        strategies=summaries,
        rows=rows,
        failures=failures,
    )


def eval_report_document(result: EvalResult, include_timings: bool = False) -> dict:
    """Machine-readable report. Wall times are opt-in: the default report is
    fully reproducible for identical seeds, byte for byte."""
    strategies = {}
    for name, summary in result.strategies.items():
        entry: dict[str, Any] = {
            "mean_accuracy": summary.mean_accuracy,
            "total_fit_count": summary.total_fit_count,
        }
        if include_timings:
            entry["total_wall_ns"] = summary.total_wall_ns
        strategies[name] = entry
    return {
        "instances": result.instance_count,
        "n_range": list(result.n_range),
        "rng_seed": result.rng_seed,
        "failures": list(result.failures),
        "strategies": strategies,
    }


def eval_rows_csv(result: EvalResult, include_timings: bool = False) -> str:
    """Per-instance rows for plotting, one line per (instance, strategy)."""
    names = sorted(result.strategies)
    header = "instance,n_nodes,strategy,accuracy,fit_count"
    if include_timings:
        header += ",wall_ns"
    lines = [header]
    for row in result.rows:
        for name in names:
            line = (
                f"{row.index},{row.n_nodes},{name},"
                f"{row.accuracy[name]:.6f},{row.fit_count[name]}"
            )
            if include_timings:
                line += f",{row.wall_ns[name]}"
            lines.append(line)
    return "\n".join(lines) + "\n"
