"""Command-line entry points.

Subcommands: build-dataset, compile-prompts, run-pipeline, evaluate and
downsample-experiment. Diagnostics go to stderr, data only to files, and
every run writes a manifest (config snapshot, seeds, paths, wall-clock,
output checksums) next to its primary output. Exit codes: 0 success,
1 validation error, 2 backend failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from .backends import (
    BackendUnavailable,
    CacheMiss,
    CorruptionConfig,
    OracleBackend,
    RemoteBackend,
    ReplayBackend,
)
from .brat import DanglingReference, MalformedLine, load_directory, validate_offsets
from .dataset import (
    TooFewDocuments,
    build_ontology,
    build_sentence_corpus,
    compute_stats,
    downsample,
    load_descriptions,
    load_ontology,
    read_dataset,
    save_ontology,
    split_corpus,
    validate_corpus,
    write_dataset,
)
from .evaluation import aggregate_runs, attribute_errors, score
from .fixtures import EVENT_TYPES
from .pipeline import PipelineConfig, PredictionSet, run_full, stage_caches
from .prompts import (
    CompileConfig,
    Task,
    augment_training,
    compile_ed,
    compile_eae,
    compile_mi,
    write_prompts,
)

log = logging.getLogger("clinevent")

BACKEND_URL_ENV = "CLINEVENT_BACKEND_URL"

VALIDATION_ERRORS = (
    ValueError,
    KeyError,
    FileNotFoundError,
    MalformedLine,
    DanglingReference,
    TooFewDocuments,
)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(65536), b""):
            h.update(block)
    return h.hexdigest()


def _write_manifest(
    subcommand: str,
    config: dict,
    inputs: list[str],
    outputs: list[str],
    started: float,
    manifest_path: Path,
) -> None:
    manifest = {
        "subcommand": subcommand,
        "config": config,
        "inputs": sorted(str(p) for p in inputs),
        "outputs": sorted(str(p) for p in outputs),
        "wall_clock_seconds": round(time.time() - started, 3),
        "checksums": {
            str(p): _sha256(Path(p)) for p in sorted(outputs) if Path(p).exists()
        },
    }
    tmp = manifest_path.with_suffix(manifest_path.suffix + ".tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, manifest_path)


def _parse_corruption(spec: str | None, seed: int) -> CorruptionConfig | None:
    """Parse --corrupt values like "drop=0.2,jitter=0.1,width=2,confuse=0.05"."""
    if not spec:
        return None
    kwargs: dict = {"seed": seed}
    names = {
        "drop": "drop_prob",
        "jitter": "jitter_prob",
        "width": "jitter_width",
        "confuse": "confuse_type_prob",
        "seed": "seed",
    }
    for item in spec.split(","):
        item = item.strip()
        if not item:
            continue
        key, _, value = item.partition("=")
        if key not in names:
            raise ValueError(f"unknown corruption knob {key!r}")
        kwargs[names[key]] = int(value) if names[key] in ("jitter_width", "seed") else float(value)
    return CorruptionConfig(**kwargs)


def _make_backend(args, corpus, ontology):
    corruption = _parse_corruption(getattr(args, "corrupt", None), args.seed)
    name = args.backend
    if name == "oracle":
        return OracleBackend(corpus, ontology, corruption)
    if name == "replay":
        if not args.cache:
            raise ValueError("the replay backend requires --cache")
        caches = stage_caches(args.cache)
        return {stage: ReplayBackend(cache) for stage, cache in caches.items()}
    if name == "remote":
        url = args.backend_url or os.environ.get(BACKEND_URL_ENV)
        if not url:
            raise ValueError(
                f"remote backend needs --backend-url or ${BACKEND_URL_ENV}"
            )
        return RemoteBackend(url, jobs=args.jobs)
    raise ValueError(f"unknown backend {name!r}")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_build_dataset(args) -> int:
    started = time.time()
    docs = load_directory(args.brat_dir)
    if not docs:
        raise ValueError(f"no .txt/.ann pairs under {args.brat_dir}")
    discrepancies = [d for doc in docs for d in validate_offsets(doc)]
    for d in discrepancies:
        log.warning("offset discrepancy %s: expected %r, found %r", d.entity_id, d.expected, d.found)

    event_types = set(args.event_types.split(",")) if args.event_types else set(EVENT_TYPES)
    corpus, dropped = build_sentence_corpus(docs, event_types)
    descriptions = load_descriptions(args.descriptions) if args.descriptions else {}
    ontology = build_ontology(corpus, descriptions)
    validate_corpus(corpus, ontology)

    write_dataset(args.out, corpus)
    save_ontology(args.ontology_out, ontology)
    outputs = [args.out, args.ontology_out]

    split = split_corpus([d.doc_id for d in docs], args.seed)
    splits_out = args.splits_out or str(Path(args.out).with_suffix(".splits.json"))
    Path(splits_out).write_text(json.dumps(split.to_json(), indent=2) + "\n", encoding="utf-8")
    outputs.append(splits_out)

    stats = compute_stats(corpus)
    if args.stats_out:
        Path(args.stats_out).write_text(
            json.dumps(stats.to_json(), indent=2) + "\n", encoding="utf-8"
        )
        outputs.append(args.stats_out)
    print(stats.as_table(), file=sys.stderr)
    if dropped:
        log.info("dropped %d cross-sentence MODIFY argument(s)", dropped)

    _write_manifest(
        "build-dataset",
        {
            "brat_dir": args.brat_dir,
            "seed": args.seed,
            "event_types": sorted(event_types),
            "descriptions": args.descriptions,
        },
        [args.brat_dir],
        outputs,
        started,
        Path(args.out).with_suffix(".manifest.json"),
    )
    return 0


def _compile_config(args) -> CompileConfig:
    toggles = frozenset(args.segments.split(",")) if args.segments else None
    cfg = CompileConfig(
        window_size=args.window_size,
        window_step=args.window_step,
        neg_ratio=args.neg_ratio,
        mention_kind=args.mention_kind,
        marker_mode=args.markers,
        augmentation=args.augment,
        seed=args.seed,
    )
    if toggles is not None:
        cfg = replace(cfg, segment_toggles=toggles)
    return cfg


def cmd_compile_prompts(args) -> int:
    started = time.time()
    corpus = read_dataset(args.dataset)
    ontology = load_ontology(args.ontology)
    cfg = _compile_config(args)
    tasks = [Task(t.strip()) for t in args.tasks.split(",") if t.strip()]

    instances = []
    for s in corpus:
        for task in tasks:
            if task in (Task.MI_TRIGGER, Task.MI_ARGUMENT, Task.MI_ENTITY):
                kind = task.value.removeprefix("mi_")
                instances.extend(compile_mi(s, replace(cfg, mention_kind=kind), args.mode))
            elif task is Task.ED:
                instances.extend(compile_ed(s, ontology, cfg, args.mode))
            elif task is Task.EAE:
                for ev in s.events:
                    instances.extend(compile_eae(s, ev, ontology, cfg, args.mode))
            else:
                raise ValueError(f"--tasks does not support {task.value} (use the API)")
    if args.mode == "train" and cfg.augmentation and cfg.marker_mode != "none":
        instances = augment_training(instances)
    write_prompts(args.out, instances)
    log.info("wrote %d instances", len(instances))

    _write_manifest(
        "compile-prompts",
        {
            "tasks": [t.value for t in tasks],
            "mode": args.mode,
            "neg_ratio": cfg.neg_ratio,
            "window": [cfg.window_size, cfg.window_step],
            "markers": cfg.marker_mode,
            "augment": cfg.augmentation,
            "seed": cfg.seed,
        },
        [args.dataset, args.ontology],
        [args.out],
        started,
        Path(args.out).with_suffix(".manifest.json"),
    )
    return 0


def cmd_run_pipeline(args) -> int:
    started = time.time()
    corpus = read_dataset(args.dataset)
    ontology = load_ontology(args.ontology)
    cfg = PipelineConfig(
        variant=args.variant,
        marker_source="none" if args.variant == "vanilla" else args.marker_source,
        compile=CompileConfig(seed=args.seed),
    )
    backend = _make_backend(args, corpus, ontology)
    caches = stage_caches(args.cache) if args.cache and args.backend != "replay" else None
    predictions = run_full(corpus, ontology, cfg, backend, caches)
    predictions.write(args.out)
    log.info("wrote predictions for %d sentences", len(predictions.sentences))

    _write_manifest(
        "run-pipeline",
        {
            "variant": cfg.variant,
            "marker_source": cfg.marker_source,
            "backend": args.backend,
            "corrupt": args.corrupt,
            "seed": args.seed,
            "cache": args.cache,
        },
        [args.dataset, args.ontology],
        [args.out],
        started,
        Path(args.out).with_suffix(".manifest.json"),
    )
    return 0


def cmd_evaluate(args) -> int:
    started = time.time()
    gold = read_dataset(args.gold)
    predictions = PredictionSet.read(args.pred)
    report = score(predictions, gold)
    payload = report.to_json()
    if args.attribution:
        payload["error_attribution"] = attribute_errors(predictions, gold).to_json()
    Path(args.report).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    outputs = [args.report]
    if args.report_text:
        Path(args.report_text).write_text(report.format_table() + "\n", encoding="utf-8")
        outputs.append(args.report_text)
    print(report.format_table(), file=sys.stderr)

    _write_manifest(
        "evaluate",
        {"attribution": args.attribution},
        [args.pred, args.gold],
        outputs,
        started,
        Path(args.report).with_suffix(".manifest.json"),
    )
    return 0


def cmd_downsample_experiment(args) -> int:
    started = time.time()
    corpus = read_dataset(args.dataset)
    ontology = load_ontology(args.ontology)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    doc_ids = sorted({s.doc_id for s in corpus})
    split = split_corpus(doc_ids, args.seed)
    test_corpus = [s for s in corpus if s.doc_id in set(split.test)]
    proportions = [float(p) for p in args.proportions.split(",")]
    seeds = list(range(args.seed, args.seed + args.runs))

    results: dict[str, dict] = {}
    subsets: dict[str, dict[str, list[str]]] = {}
    outputs: list[str] = []
    for proportion in proportions:
        reports = []
        subsets[str(proportion)] = {}
        for run_seed in seeds:
            train_subset = downsample(split.train, proportion, run_seed)
            subsets[str(proportion)][str(run_seed)] = train_subset
            run_args = argparse.Namespace(**vars(args))
            run_args.seed = run_seed
            backend = _make_backend(run_args, corpus, ontology)
            cfg = PipelineConfig(
                variant=args.variant,
                marker_source="none" if args.variant == "vanilla" else args.marker_source,
                compile=CompileConfig(seed=run_seed),
            )
            predictions = run_full(test_corpus, ontology, cfg, backend)
            reports.append(score(predictions, test_corpus))
        aggregate = aggregate_runs(reports)
        results[str(proportion)] = aggregate.to_json()
        line = "  ".join(
            f"{task}={100 * aggregate.cells[task]['f1'].mean:.2f}"
            for task in ("trigger_id", "trigger_cls", "arg_id", "arg_cls")
        )
        print(f"proportion {proportion:>5}: {line}", file=sys.stderr)

    results_path = out_dir / "downsample_results.json"
    results_path.write_text(json.dumps(results, indent=2) + "\n", encoding="utf-8")
    subsets_path = out_dir / "downsample_subsets.json"
    subsets_path.write_text(json.dumps(subsets, indent=2) + "\n", encoding="utf-8")
    outputs.extend([str(results_path), str(subsets_path)])

    _write_manifest(
        "downsample-experiment",
        {
            "proportions": proportions,
            "runs": args.runs,
            "seed": args.seed,
            "variant": args.variant,
            "backend": args.backend,
            "corrupt": args.corrupt,
        },
        [args.dataset, args.ontology],
        outputs,
        started,
        out_dir / "downsample.manifest.json",
    )
    return 0


# ---------------------------------------------------------------------------
# Argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clinevent", description="Clinical event extraction toolkit"
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-dataset", help="BRAT directory -> sentence dataset + ontology")
    p.add_argument("--brat-dir", required=True)
    p.add_argument("--out", required=True, help="dataset JSONL path")
    p.add_argument("--ontology-out", required=True)
    p.add_argument("--descriptions", help="JSON map of type/role name -> description")
    p.add_argument("--splits-out")
    p.add_argument("--stats-out")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument(
        "--event-types",
        help="comma-separated event type labels (default: the 13 clinical types)",
    )
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("compile-prompts", help="dataset -> input/target sequence JSONL")
    p.add_argument("--dataset", required=True)
    p.add_argument("--ontology", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tasks", default="mi_trigger,mi_argument,ed,eae")
    p.add_argument("--mode", choices=["train", "inference"], default="train")
    p.add_argument("--neg-ratio", type=int, default=10)
    p.add_argument("--window-size", type=int, default=10)
    p.add_argument("--window-step", type=int, default=4)
    p.add_argument("--mention-kind", choices=["entity", "trigger", "argument"], default="entity")
    p.add_argument("--markers", choices=["none", "gold"], default="none")
    p.add_argument("--augment", action="store_true")
    p.add_argument("--segments", help="comma-separated prompt segments to keep")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_compile_prompts)

    p = sub.add_parser("run-pipeline", help="pipelined MI -> ED -> EAE inference")
    p.add_argument("--dataset", required=True)
    p.add_argument("--ontology", required=True)
    p.add_argument("--out", required=True, help="prediction JSONL path")
    p.add_argument("--variant", choices=["vanilla", "full"], default="full")
    p.add_argument("--marker-source", choices=["none", "standalone_mi", "gold"], default="standalone_mi")
    p.add_argument("--backend", choices=["oracle", "replay", "remote"], default="oracle")
    p.add_argument("--backend-url", help=f"remote service URL (or ${BACKEND_URL_ENV})")
    p.add_argument("--corrupt", help="oracle corruption, e.g. drop=0.2,jitter=0.1,width=2")
    p.add_argument(
        "--cache",
        help="replay cache directory, one JSONL per stage (write-through unless --backend replay)",
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1, help="bound on in-flight remote batches")
    p.set_defaults(func=cmd_run_pipeline)

    p = sub.add_parser("evaluate", help="score predictions against gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--report-text", help="also write the aligned-column table")
    p.add_argument("--attribution", action="store_true", help="add per-stage error attribution")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser(
        "downsample-experiment",
        help="training-proportion sweep: subsets plus aggregate pipeline scores",
    )
    p.add_argument("--dataset", required=True)
    p.add_argument("--ontology", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--proportions", default="0.10,0.25,0.50,0.75")
    p.add_argument("--runs", type=int, default=3, help="seeds per proportion")
    p.add_argument("--variant", choices=["vanilla", "full"], default="full")
    p.add_argument("--marker-source", choices=["none", "standalone_mi", "gold"], default="standalone_mi")
    p.add_argument("--backend", choices=["oracle", "replay", "remote"], default="oracle")
    p.add_argument("--backend-url")
    p.add_argument("--corrupt")
    p.add_argument("--cache")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_downsample_experiment)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (BackendUnavailable, CacheMiss) as exc:
        log.error("backend failure: %s", exc)
        return 2
    except VALIDATION_ERRORS as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
