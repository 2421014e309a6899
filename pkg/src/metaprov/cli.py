"""Command-line front end.

Commands: check, tree, diff, generate, evaluate, embed. One config file can
set every tolerance and parameter; command-line flags win over the file.

Exit codes: 0 success; 1 inconsistency above the fail-over threshold;
2 input error (unparseable corpus, unknown id, bad config, missing file);
3 guard refusal (brute force beyond the node cap).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from .consistency import (
    CapabilityTable,
    FixtureEnvironmentProvider,
    Tolerances,
    default_capability_table,
    default_environment_provider,
    evaluate_all,
    report_to_dict,
)
from .embedding import build_clusters, default_schemas, load_schemas
from .errors import (
    DiscoveryError,
    GenerationError,
    MetaprovError,
    RecordValidationError,
    SidecarSyntaxError,
    TreeSizeError,
)
from .evalgen import (
    corpus_spec_from_obj,
    eval_report_document,
    eval_rows_csv,
    generate_corpus,
    run_experiment,
)
from .ingest import LocalCorpusProvider, VersionQuery, discover_versions, sort_by_upload
from .model import ImageServiceRecord
from .sidecar import dump_corpus, load_corpus
from .versiontree import (
    DEFAULT_N_MAX,
    HeuristicParams,
    build_baseline_chain,
    build_tree_bruteforce,
    build_tree_heuristic,
    semantic_diff,
    to_dot,
    tree_to_document,
)

EXIT_OK = 0
EXIT_INCONSISTENT = 1
EXIT_INPUT_ERROR = 2
EXIT_GUARD = 3


@dataclasses.dataclass
class CliConfig:
    tolerances: Tolerances = dataclasses.field(default_factory=Tolerances)
    heuristic: HeuristicParams = dataclasses.field(default_factory=HeuristicParams)
    n_max: int = DEFAULT_N_MAX
    text_dims: int | None = None  # None: whatever the schema table says
    missing_penalty: float = 1.0
    fail_over: float = 0.0
    output_format: str = "document"  # dot | document | csv
    capabilities_path: str | None = None
    environment_path: str | None = None
    schemas_path: str | None = None

    def check_bounds(self) -> list[str]:
        problems = self.tolerances.check_bounds() + self.heuristic.check_bounds()
        if self.n_max < 1:
            problems.append("n_max must be >= 1")
        if self.text_dims is not None and self.text_dims < 2:
            problems.append("text_dims must be >= 2")
        if self.missing_penalty <= 0:
            problems.append("missing_penalty must be > 0")
        if not 0.0 <= self.fail_over <= 1.0:
            problems.append("fail_over must be within [0, 1]")
        if self.output_format not in ("dot", "document", "csv"):
            problems.append("format must be one of dot, document, csv")
        return problems


def _config_from_file(path: str) -> CliConfig:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    config = CliConfig()
    if "tolerances" in obj:
        config.tolerances = dataclasses.replace(
            Tolerances(),
            **{
                k: tuple(v) if isinstance(v, list) else v
                for k, v in obj["tolerances"].items()
            },
        )
    if "heuristic" in obj:
        config.heuristic = dataclasses.replace(HeuristicParams(), **obj["heuristic"])
    for key in (
        "n_max",
        "text_dims",
        "missing_penalty",
        "fail_over",
        "capabilities_path",
        "environment_path",
        "schemas_path",
    ):
        if key in obj:
            setattr(config, key, obj[key])
    if "format" in obj:
        config.output_format = obj["format"]
    return config


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _json_doc(obj: Any) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _load_versions(corpus_path: str) -> list[ImageServiceRecord]:
    provider = LocalCorpusProvider(corpus_path)
    return list(discover_versions(VersionQuery("*", corpus_path), provider).records)


def _resolve_schemas(config: CliConfig):
    if config.schemas_path:
        schemas, file_dims = load_schemas(config.schemas_path)
    else:
        schemas, file_dims = default_schemas()
    return schemas, (config.text_dims if config.text_dims is not None else file_dims)


def _cmd_check(args: argparse.Namespace, config: CliConfig) -> int:
    versions = _load_versions(args.corpus)
    db = (
        CapabilityTable.from_file(config.capabilities_path)
        if config.capabilities_path
        else default_capability_table()
    )
    env = (
        FixtureEnvironmentProvider.from_file(config.environment_path)
        if config.environment_path
        else default_environment_provider()
    )
    fail_over = args.fail_over if args.fail_over is not None else config.fail_over
    reports = [evaluate_all(v, db, env, config.tolerances) for v in versions]
    _emit(_json_doc({"reports": [report_to_dict(r) for r in reports]}), args.out)
    worst = max((r.aggregate for r in reports if r.aggregate is not None), default=0.0)
    return EXIT_INCONSISTENT if worst > fail_over else EXIT_OK


def _cmd_tree(args: argparse.Namespace, config: CliConfig) -> int:
    versions = _load_versions(args.corpus)
    schemas, text_dims = _resolve_schemas(config)
    common = dict(
        schemas=schemas, text_dims=text_dims, missing_penalty=config.missing_penalty
    )
    if args.strategy == "baseline":
        tree = build_baseline_chain(versions, **common)
    elif args.strategy == "heuristic":
        tree = build_tree_heuristic(versions, params=config.heuristic, **common)
    else:
        tree = build_tree_bruteforce(versions, n_max=config.n_max, **common)
    fmt = args.format or config.output_format
    if fmt == "dot":
        _emit(to_dot(tree, versions), args.out)
    else:
        _emit(_json_doc(tree_to_document(tree)), args.out)
    return EXIT_OK


def _cmd_diff(args: argparse.Namespace, config: CliConfig) -> int:
    versions = _load_versions(args.corpus)
    by_id = {v.id: v for v in versions}
    for vid in (args.id_a, args.id_b):
        if vid not in by_id:
            raise DiscoveryError(f"unknown version id {vid!r}")
    _schemas, text_dims = _resolve_schemas(config)
    diff = semantic_diff(by_id[args.id_a], by_id[args.id_b], text_dims)
    _emit(
        _json_doc(
            {
                "from": args.id_a,
                "to": args.id_b,
                "delta_spatial_km": diff.delta_spatial_km,
                "changed_labels": list(diff.changed_labels),
                "delta_temporal_s": diff.delta_temporal_s,
                "delta_context": diff.delta_context,
            }
        ),
        args.out,
    )
    return EXIT_OK


def _cmd_generate(args: argparse.Namespace, config: CliConfig) -> int:
    obj = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    spec = corpus_spec_from_obj(obj)
    versions, truth = generate_corpus(spec)
    ground_truth: dict[str, str | None] = {truth.root: None}
    ground_truth.update(truth.parent)
    _emit(dump_corpus(versions, ground_truth) + "\n", args.out)
    return EXIT_OK


def _parse_node_range(text: str) -> tuple[int, int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
    elif "-" in text:
        lo, hi = text.split("-", 1)
    else:
        lo = hi = text
    return int(lo), int(hi)


def _cmd_evaluate(args: argparse.Namespace, config: CliConfig) -> int:
    schemas, _dims = _resolve_schemas(config)
    result = run_experiment(
        instance_count=args.instances,
        n_range=_parse_node_range(args.nodes),
        params=config.heuristic,
        rng_seed=args.seed,
        n_ops_per_edge=args.ops_per_edge,
        schemas=schemas,
        strategies=tuple(args.strategies.split(",")),
        n_max=config.n_max,
    )
    _emit(_json_doc(eval_report_document(result, include_timings=args.timings)), args.out)
    if args.csv:
        Path(args.csv).write_text(
            eval_rows_csv(result, include_timings=args.timings), encoding="utf-8"
        )
    return EXIT_OK


def _cmd_embed(args: argparse.Namespace, config: CliConfig) -> int:
    versions = sort_by_upload(_load_versions(args.corpus))
    schemas, text_dims = _resolve_schemas(config)
    clusters = build_clusters(versions, schemas, text_dims)
    if not args.dump:
        groups = sorted({g for c in clusters for g in c.points})
        sys.stdout.write(f"{len(clusters)} clusters over {len(groups)} groups\n")
        return EXIT_OK
    doc = {
        "clusters": [
            {
                "version_id": c.version_id,
                "t_upload": c.t_upload,
                "points": {g: [float(x) for x in c.points[g].values] for g in sorted(c.points)},
            }
            for c in clusters
        ]
    }
    _emit(_json_doc(doc), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metaprov",
        description="Metadata-only change detection and version trees for crowdsourced images.",
    )
    parser.add_argument("--config", help="config file (sidecar JSON) with tolerances and parameters")
    parser.add_argument("--seed", type=int, default=0, help="rng seed for commands that sample")
    parser.add_argument(
        "--format",
        choices=("dot", "document", "csv"),
        default=None,
        help="output format override",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="consistency-check every record of a corpus")
    p.add_argument("corpus")
    p.add_argument("--fail-over", type=float, default=None, help="max tolerated aggregate score")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("tree", help="construct a version tree")
    p.add_argument("corpus")
    p.add_argument("--strategy", choices=("baseline", "heuristic", "bruteforce"), default="heuristic")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_tree)

    p = sub.add_parser("diff", help="semantic diff between two versions")
    p.add_argument("corpus")
    p.add_argument("id_a")
    p.add_argument("id_b")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_diff)

    p = sub.add_parser("generate", help="materialize a corpus from a spec file")
    p.add_argument("--spec", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("evaluate", help="run the accuracy/run-time comparison")
    p.add_argument("--instances", type=int, required=True)
    p.add_argument("--nodes", default="5..8", help="node-count range, e.g. 5..8")
    p.add_argument("--ops-per-edge", type=int, default=1)
    p.add_argument("--strategies", default="baseline,heuristic,bruteforce")
    p.add_argument("--timings", action="store_true", help="include wall times (non-reproducible)")
    p.add_argument("--out")
    p.add_argument("--csv", help="also write per-instance rows as CSV")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("embed", help="inspect the normalized cluster space")
    p.add_argument("corpus")
    p.add_argument("--dump", action="store_true", help="print full cluster vectors")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_embed)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _config_from_file(args.config) if args.config else CliConfig()
    except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
        print(f"error: cannot load config: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    problems = config.check_bounds()
    if problems:
        print("error: invalid configuration: " + "; ".join(problems), file=sys.stderr)
        return EXIT_INPUT_ERROR

    try:
        return args.func(args, config)
    except TreeSizeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (
        SidecarSyntaxError,
        RecordValidationError,
        DiscoveryError,
        GenerationError,
        FileNotFoundError,
        json.JSONDecodeError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except MetaprovError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
