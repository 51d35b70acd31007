"""Command-line front end.

Subcommands wire the library into pipeline steps: split, embed, replay,
allocate, select, eval (clip, fd, forgetting, report), and stats. Every
subcommand is a thin adapter over the library operations. Exit codes:
0 success, 1 usage error, 2 data error, 3 service error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import benchmark, dataio, metrics
from ._version import __version__
from .allocation import allocate_budget
from .errors import DataError, ServiceError, UnknownClass
from .model import EmbeddingTable, ReplayParams, valid_captions, validate_inventory
from .providers import EmbeddingProvider, ProviderConfig, caption_key
from .replay import create_replay_set
from .selection import embed_asset, select_kcenter, select_random

ENDPOINT_ENV = "REPLAYKIT_ENDPOINT"
DEFAULT_SEED = 0


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage errors; the contract here is 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def main(argv: list[str] | None = None) -> int:
    return run(sys.argv[1:] if argv is None else argv)


def run(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        return int(args.func(args) or 0)
    except _UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except ServiceError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 3
    except (DataError, ZeroDivisionError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


def build_parser() -> _Parser:
    parser = _Parser(prog="replaykit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("split", help="build class-incremental benchmark splits")
    p.add_argument("--metadata", required=True, help="asset metadata (JSONL)")
    p.add_argument("--spec", help="split spec JSON (overrides the class-list flags)")
    p.add_argument("--base-classes", help="base class labels, one per line")
    p.add_argument("--novel-classes", help="novel class labels, one per line")
    p.add_argument("--min-class-size", type=int, default=15)
    p.add_argument("--max-classes", type=int, default=90)
    p.add_argument("--test-per-class", type=int, default=5)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("embed", help="embed captions into a table file")
    p.add_argument("--metadata", required=True)
    p.add_argument("--provider", choices=("file", "http"), default="http")
    p.add_argument("--table", help="embedding table (file provider)")
    p.add_argument("--endpoint", help=f"embedding service URL (default: ${ENDPOINT_ENV})")
    p.add_argument("--cache", help="write-through cache table path")
    p.add_argument("--max-captions", type=int, default=11)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--max-in-flight", type=int, default=1)
    p.add_argument("--timeout", type=float, default=10.0)
    p.add_argument("--out", required=True, help="output embedding table")
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("replay", help="build a replay manifest")
    p.add_argument("--metadata", required=True, help="base metadata; test records are excluded")
    p.add_argument("--novel-metadata", help="novel metadata; its train size sets the budget")
    p.add_argument("--novel-size", type=int, help="novel train size (alternative to --novel-metadata)")
    p.add_argument("--embeddings", help="caption embedding table (file provider)")
    p.add_argument("--endpoint", help=f"embedding service URL (default: ${ENDPOINT_ENV})")
    p.add_argument("--cache", help="write-through cache table path")
    p.add_argument("--replay-pct", type=float, default=20.0)
    p.add_argument("--m-min", type=int, default=3)
    p.add_argument("--m-max", type=int, default=20)
    p.add_argument("--p-max", type=float, default=0.30, help="accepts 0.30 or 30")
    p.add_argument("--max-captions", type=int, default=11)
    p.add_argument("--strategy", choices=("kcenter", "random"), default="kcenter")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--threads", type=int, default=1, help="per-class selection parallelism")
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--max-in-flight", type=int, default=1)
    p.add_argument("--timeout", type=float, default=10.0)
    p.add_argument("--out", required=True, help="manifest path")
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("allocate", help="compute per-class quotas for a budget")
    p.add_argument("--metadata", required=True, help="base metadata; test records are excluded")
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--m-min", type=int, default=3)
    p.add_argument("--m-max", type=int, default=20)
    p.add_argument("--p-max", type=float, default=0.30, help="accepts 0.30 or 30")
    p.add_argument("--out", help="also write the plan JSON here")
    p.set_defaults(func=_cmd_allocate)

    p = sub.add_parser("select", help="select exemplars for one class")
    p.add_argument("--metadata", required=True, help="base metadata; test records are excluded")
    p.add_argument("--class", dest="class_label", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--strategy", choices=("kcenter", "random"), default="kcenter")
    p.add_argument("--embeddings", help="caption embedding table (file provider)")
    p.add_argument("--endpoint", help=f"embedding service URL (default: ${ENDPOINT_ENV})")
    p.add_argument("--cache", help="write-through cache table path")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--max-captions", type=int, default=11)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--max-in-flight", type=int, default=1)
    p.add_argument("--timeout", type=float, default=10.0)
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("eval", help="evaluation metrics")
    esub = p.add_subparsers(dest="eval_command", required=True, metavar="metric")

    e = esub.add_parser("clip", help="text-render alignment score")
    e.add_argument("--text-features", required=True, help="table keyed by asset_id")
    e.add_argument("--render-features", required=True, help="table keyed by render id")
    e.add_argument("--grouping", required=True, help="JSON: asset_id -> [render ids]")
    e.set_defaults(func=_cmd_eval_clip)

    e = esub.add_parser("fd", help="Fréchet distance between two feature tables")
    e.add_argument("--features-a", required=True)
    e.add_argument("--features-b", required=True)
    e.set_defaults(func=_cmd_eval_fd)

    e = esub.add_parser("forgetting", help="relative base-metric change, percent")
    e.add_argument("--before", type=float, required=True)
    e.add_argument("--after", type=float, required=True)
    e.add_argument("--direction", choices=("higher", "lower"), required=True)
    e.set_defaults(func=_cmd_eval_forgetting)

    e = esub.add_parser("report", help="assemble a base/novel/all metric report")
    e.add_argument("--metric", choices=("clip", "fd"), required=True)
    e.add_argument("--base-scores", help="clip: JSON map asset_id -> cosine")
    e.add_argument("--novel-scores", help="clip: JSON map asset_id -> cosine")
    e.add_argument("--generated-base", help="fd: feature table")
    e.add_argument("--reference-base", help="fd: feature table")
    e.add_argument("--generated-novel", help="fd: feature table")
    e.add_argument("--reference-novel", help="fd: feature table")
    e.add_argument("--base-before", type=float, help="base value before novel training")
    e.add_argument("--json", dest="json_out", help="also write the report JSON here")
    e.set_defaults(func=_cmd_eval_report)

    p = sub.add_parser("stats", help="per-split statistics for a metadata file")
    p.add_argument("--metadata", required=True)
    p.set_defaults(func=_cmd_stats)

    return parser


# -- subcommand implementations ------------------------------------------------

def _cmd_split(args) -> int:
    records = dataio.load_metadata(args.metadata)
    if args.spec:
        spec = benchmark.spec_from_dict(json.loads(dataio.read_text(args.spec)))
    else:
        if not args.base_classes or not args.novel_classes:
            raise _UsageError("pass --spec, or both --base-classes and --novel-classes")
        spec = benchmark.SplitSpec(
            base_classes=tuple(dataio.load_class_list(args.base_classes)),
            novel_classes=tuple(dataio.load_class_list(args.novel_classes)),
            min_class_size=args.min_class_size,
            max_classes=args.max_classes,
            test_per_class=args.test_per_class,
            seed=args.seed,
        )
    inventory = benchmark.filter_classes(records, spec.min_class_size, spec.max_classes)
    splits = benchmark.build_splits(inventory, spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for group in ("base", "novel"):
        merged = sorted(
            splits[f"{group}_train"] + splits[f"{group}_test"],
            key=lambda r: (r.class_label, r.asset_id),
        )
        dataio.save_metadata(merged, out / f"{group}.jsonl")
    stats = benchmark.split_stats(splits)
    stats["seed"] = spec.seed
    dataio.save_json(stats, out / "stats.json")
    sys.stdout.write(dataio.canonical_json(stats))
    return 0


def _cmd_embed(args) -> int:
    records = dataio.load_metadata(args.metadata)
    provider = _build_provider(args, mode=args.provider, table=args.table)
    captions = list(
        dict.fromkeys(
            caption
            for record in records
            for caption in valid_captions(record.captions, args.max_captions)
        )
    )
    vectors = provider.embed_texts(captions)
    table = EmbeddingTable(
        {caption_key(c): v for c, v in zip(captions, vectors)}, dim=provider.dim
    )
    dataio.save_embeddings(table, args.out)
    _emit({"captions": len(captions), "dim": table.dim, "out": str(args.out)})
    return 0


def _cmd_replay(args) -> int:
    records = dataio.load_metadata(args.metadata)
    inventory = validate_inventory([r for r in records if r.split != "test"])
    digests = {"metadata": dataio.file_digest(args.metadata)}
    if args.novel_metadata:
        novel_records = dataio.load_metadata(args.novel_metadata)
        novel_size = sum(1 for r in novel_records if r.split != "test")
        digests["novel_metadata"] = dataio.file_digest(args.novel_metadata)
    elif args.novel_size is not None:
        novel_size = args.novel_size
    else:
        raise _UsageError("pass --novel-metadata or --novel-size")
    params = ReplayParams(
        replay_pct=args.replay_pct,
        m_min=args.m_min,
        m_max=args.m_max,
        p_max=_normalize_fraction(args.p_max, "--p-max"),
        max_captions=args.max_captions,
        strategy=args.strategy,
        seed=args.seed,
    )
    provider = None
    if params.strategy == "kcenter":
        provider = _build_provider(args)
        if args.embeddings:
            digests["embeddings"] = dataio.file_digest(args.embeddings)
    manifest = create_replay_set(
        inventory,
        novel_size,
        params,
        provider,
        threads=args.threads,
        input_digests=digests,
    )
    dataio.save_manifest(manifest, args.out)
    _emit(
        {
            "alpha": manifest.allocation.alpha,
            "budget": manifest.allocation.budget,
            "out": str(args.out),
            "seed": params.seed,
            "selected": manifest.allocation.total(),
            "shortfall": manifest.allocation.shortfall,
        }
    )
    return 0


def _cmd_allocate(args) -> int:
    records = dataio.load_metadata(args.metadata)
    inventory = validate_inventory([r for r in records if r.split != "test"])
    plan = allocate_budget(
        inventory, args.budget, args.m_min, args.m_max, _normalize_fraction(args.p_max, "--p-max")
    )
    payload = dataio.plan_to_dict(plan)
    if args.out:
        dataio.save_json(payload, args.out)
    _emit(payload)
    return 0


def _cmd_select(args) -> int:
    records = dataio.load_metadata(args.metadata)
    chosen = [
        r for r in records if r.class_label == args.class_label and r.split != "test"
    ]
    if not chosen:
        raise UnknownClass(f"no records for class {args.class_label!r}")
    if args.k >= len(chosen):
        ids = sorted(r.asset_id for r in chosen)
    elif args.strategy == "random":
        ids = select_random(chosen, args.k, args.seed)
    else:
        provider = _build_provider(args)
        embeddings = [embed_asset(r, provider, args.max_captions) for r in chosen]
        ids = list(select_kcenter(embeddings, args.k).ids)
    _emit(
        {
            "class": args.class_label,
            "ids": ids,
            "k": args.k,
            "seed": args.seed,
            "strategy": args.strategy,
        }
    )
    return 0


def _cmd_eval_clip(args) -> int:
    text = dataio.load_embeddings(args.text_features)
    render = dataio.load_embeddings(args.render_features)
    grouping = _load_grouping(args.grouping)
    sys.stdout.write(f"{metrics.clip_score(text, render, grouping):.4f}\n")
    return 0


def _cmd_eval_fd(args) -> int:
    value = metrics.frechet_distance(
        metrics.moments(_feature_set("a", args.features_a)),
        metrics.moments(_feature_set("b", args.features_b)),
    )
    sys.stdout.write(f"{value:.4f}\n")
    return 0


def _cmd_eval_forgetting(args) -> int:
    value = metrics.forgetting(args.before, args.after, f"{args.direction}_better")
    sys.stdout.write(f"{value:.2f}\n")
    return 0


def _cmd_eval_report(args) -> int:
    if args.metric == "clip":
        if not args.base_scores or not args.novel_scores:
            raise _UsageError("clip report needs --base-scores and --novel-scores")
        report = metrics.assemble_clip_report(
            _load_scores(args.base_scores), _load_scores(args.novel_scores), args.base_before
        )
    else:
        needed = ("generated_base", "reference_base", "generated_novel", "reference_novel")
        if any(getattr(args, name) is None for name in needed):
            raise _UsageError(
                "fd report needs --generated-base, --reference-base, "
                "--generated-novel, and --reference-novel"
            )
        report = metrics.assemble_fd_report(
            _feature_set("generated-base", args.generated_base),
            _feature_set("reference-base", args.reference_base),
            _feature_set("generated-novel", args.generated_novel),
            _feature_set("reference-novel", args.reference_novel),
            args.base_before,
        )
    if args.json_out:
        dataio.save_json(metrics_report_dict(report), args.json_out)
    sys.stdout.write(metrics.render_report_table(report) + "\n")
    return 0


def _cmd_stats(args) -> int:
    records = dataio.load_metadata(args.metadata)
    groups: dict[str, list] = {}
    for record in records:
        groups.setdefault(record.split, []).append(record)
    sys.stdout.write(dataio.canonical_json(benchmark.split_stats(groups)))
    return 0


# -- helpers --------------------------------------------------------------------

def metrics_report_dict(report) -> dict:
    return {
        "metric": report.metric,
        "direction": report.direction,
        "base": report.base,
        "novel": report.novel,
        "all": report.overall,
        "forgetting_pct": report.forgetting_pct,
        "notes": list(report.notes),
    }


def _build_provider(args, mode: str | None = None, table: str | None = None):
    table = table if table is not None else getattr(args, "embeddings", None)
    endpoint = getattr(args, "endpoint", None) or os.environ.get(ENDPOINT_ENV)
    if mode is None:
        if table:
            mode = "file"
        elif endpoint:
            mode = "http"
        else:
            raise _UsageError(
                f"pass --embeddings for a local table, or --endpoint / ${ENDPOINT_ENV} "
                "for a remote service"
            )
    if mode == "file" and not table:
        raise _UsageError("file provider needs --table/--embeddings")
    if mode == "http" and not endpoint:
        raise _UsageError(f"http provider needs --endpoint or ${ENDPOINT_ENV}")
    config = ProviderConfig(
        mode=mode,
        table_path=table,
        endpoint_url=endpoint,
        batch_size=args.batch_size,
        timeout=args.timeout,
        max_in_flight=args.max_in_flight,
        cache_path=getattr(args, "cache", None),
    )
    return EmbeddingProvider(config)


def _normalize_fraction(value: float, flag: str) -> float:
    normalized = value / 100.0 if value > 1.0 else value
    if not 0 < normalized <= 1:
        raise _UsageError(f"{flag} must be in (0, 1] or a percentage in (1, 100]")
    return normalized


def _load_grouping(path: str) -> dict[str, list[str]]:
    obj = json.loads(dataio.read_text(path))
    if not isinstance(obj, dict) or not all(
        isinstance(k, str) and isinstance(v, list) and all(isinstance(i, str) for i in v)
        for k, v in obj.items()
    ):
        raise DataError(f"{path}: grouping must map asset_id to a list of render ids")
    return obj


def _load_scores(path: str) -> dict[str, float]:
    obj = json.loads(dataio.read_text(path))
    if not isinstance(obj, dict) or not all(
        isinstance(k, str) and isinstance(v, (int, float)) for k, v in obj.items()
    ):
        raise DataError(f"{path}: scores must map asset_id to a number")
    return {k: float(v) for k, v in obj.items()}


def _feature_set(label: str, path: str) -> metrics.FeatureSet:
    table = dataio.load_embeddings(path)
    return metrics.FeatureSet(label, table.matrix())


def _emit(payload: dict) -> None:
    sys.stdout.write(dataio.canonical_json(payload))
