"""Command-line entry point.

``reviewmill <stage> --config pipeline.yaml`` runs one pipeline stage against
the configured work directory. Every typed pipeline error maps to a stable
exit code and a one-line JSON error record on stderr, so wrappers can branch
without scraping prose.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from typing import Callable, Sequence

from .augment import verify_dataset
from .config import PipelineConfig, load_config
from .errors import EXIT_OK, PipelineError
from .manifest import StageManifest
from . import stages

_NO_SLEEP: Callable[[float], None] = lambda _seconds: None


def _emit_manifest(manifest: StageManifest) -> None:
    print(json.dumps(manifest.to_json_dict(), sort_keys=True))


def _sleeper(args: argparse.Namespace) -> Callable[[float], None]:
    # Replayed retries should not actually wait.
    return _NO_SLEEP if args.offline else time.sleep


def _load(args: argparse.Namespace) -> PipelineConfig:
    config = load_config(args.config)
    overrides = {}
    if getattr(args, "workdir", None):
        overrides["workdir"] = args.workdir
    aug_overrides = {}
    if getattr(args, "dedup", False):
        aug_overrides["dedup"] = True
    if getattr(args, "n_variants", None):
        aug_overrides["n_variants"] = args.n_variants
    if aug_overrides:
        overrides["augment"] = dataclasses.replace(config.augment, **aug_overrides)
    eval_overrides = {}
    if getattr(args, "iou_agg", None):
        eval_overrides["iou_agg"] = args.iou_agg
    if getattr(args, "skip_failures", False):
        eval_overrides["skip_failures"] = True
    if getattr(args, "annotations", None):
        eval_overrides["annotations"] = args.annotations
    if eval_overrides:
        overrides["eval"] = dataclasses.replace(config.eval, **eval_overrides)
    return dataclasses.replace(config, **overrides) if overrides else config


def _cmd_ingest(args: argparse.Namespace) -> int:
    _emit_manifest(stages.run_ingest(_load(args)))
    return EXIT_OK


def _cmd_reconstruct(args: argparse.Namespace) -> int:
    _emit_manifest(stages.run_reconstruct(_load(args)))
    return EXIT_OK


def _cmd_filter(args: argparse.Namespace) -> int:
    config = _load(args)
    client = None
    if config.filter.semantic and not args.rules_only:
        client = stages.build_client(config, offline=args.offline)
    _emit_manifest(stages.run_filter(config, client, sleep=_sleeper(args)))
    return EXIT_OK


def _cmd_truncate(args: argparse.Namespace) -> int:
    _emit_manifest(stages.run_truncate(_load(args)))
    return EXIT_OK


def _cmd_augment(args: argparse.Namespace) -> int:
    config = _load(args)
    client = stages.build_client(config, offline=args.offline)
    _emit_manifest(stages.run_augment(config, client, sleep=_sleeper(args)))
    return EXIT_OK


def _cmd_review(args: argparse.Namespace) -> int:
    config = _load(args)
    client = stages.build_client(config, offline=args.offline)
    steps = args.steps.split(",") if args.steps else None
    _emit_manifest(stages.run_review(config, client, steps=steps, sleep=_sleeper(args)))
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    config = _load(args)
    judge = stages.build_client(config, offline=args.offline)
    _emit_manifest(stages.run_eval(config, judge, sleep=_sleeper(args)))
    return EXIT_OK


def _cmd_ablate(args: argparse.Namespace) -> int:
    config = _load(args)
    client = stages.build_client(config, offline=args.offline)
    _emit_manifest(stages.run_ablate(config, client, sleep=_sleeper(args)))
    return EXIT_OK


def _cmd_verify_dataset(args: argparse.Namespace) -> int:
    report = verify_dataset(args.dataset)
    print(
        json.dumps(
            {
                "total_records": report.total_records,
                "groups": report.groups,
                "n_variants": report.n_variants,
                "duplicate_answers": report.duplicate_answers,
            },
            sort_keys=True,
        )
    )
    return EXIT_OK


def _add_config_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--config", required=True, help="pipeline configuration YAML file"
    )
    parser.add_argument("--workdir", help="override the configured work directory")


def _add_endpoint_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--offline",
        action="store_true",
        help="never touch the network; replay from the configured cassette",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reviewmill",
        description=(
            "Build review-comment fine-tuning corpora from code-review archives "
            "and score structured review output."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="archives -> qualifying review events")
    _add_config_arg(p)
    p.set_defaults(fn=_cmd_ingest)

    p = sub.add_parser("reconstruct", help="events -> pre-change code context")
    _add_config_arg(p)
    p.set_defaults(fn=_cmd_reconstruct)

    p = sub.add_parser("filter", help="drop non-substantive comments")
    _add_config_arg(p)
    _add_endpoint_args(p)
    p.add_argument(
        "--rules-only",
        action="store_true",
        help="skip the endpoint screen even when configured",
    )
    p.set_defaults(fn=_cmd_filter)

    p = sub.add_parser("truncate", help="fit contexts to the token budget")
    _add_config_arg(p)
    p.set_defaults(fn=_cmd_truncate)

    p = sub.add_parser("augment", help="sample answer variants -> dataset.jsonl")
    _add_config_arg(p)
    _add_endpoint_args(p)
    p.add_argument(
        "--dedup",
        action="store_true",
        help="re-draw word-for-word duplicate answers instead of keeping them",
    )
    p.add_argument(
        "--n",
        type=int,
        dest="n_variants",
        metavar="N",
        help="override the configured number of answer variants per query",
    )
    p.set_defaults(fn=_cmd_augment)

    p = sub.add_parser("review", help="generate structured reviews per sample")
    _add_config_arg(p)
    _add_endpoint_args(p)
    p.add_argument(
        "--steps",
        help="comma-separated reasoning steps (default: configured steps)",
    )
    p.set_defaults(fn=_cmd_review)

    p = sub.add_parser("eval", help="score reviews: line IoU and judged hit rate")
    _add_config_arg(p)
    _add_endpoint_args(p)
    p.add_argument("--iou-agg", choices=("macro", "micro"))
    p.add_argument(
        "--skip-failures",
        action="store_true",
        help="score only samples whose generation succeeded",
    )
    p.add_argument("--annotations", help="human annotation CSV to fold in")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("ablate", help="run the reasoning-step removal grid")
    _add_config_arg(p)
    _add_endpoint_args(p)
    p.add_argument("--iou-agg", choices=("macro", "micro"))
    p.add_argument("--skip-failures", action="store_true")
    p.set_defaults(fn=_cmd_ablate)

    p = sub.add_parser("verify-dataset", help="check dataset.jsonl group structure")
    p.add_argument("dataset", help="path to a dataset.jsonl file")
    p.set_defaults(fn=_cmd_verify_dataset)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except PipelineError as exc:
        record = {
            "error": type(exc).__name__,
            "message": str(exc),
            "exit_code": exc.exit_code,
        }
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
