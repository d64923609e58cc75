"""File-chained stage runners.

Each runner reads the previous stage's JSONL output from the work directory,
writes its own output plus a count-conserving manifest, and returns the
manifest. Invoking a stage before its producer has run raises
:class:`StageOrderError` — nothing is inferred or silently regenerated.

The chain:

    ingest      archives          -> events.jsonl (+ projects.jsonl, fixlinks.jsonl)
    reconstruct events.jsonl      -> reconstructed.jsonl   (needs local clones)
    filter      reconstructed     -> filtered.jsonl
    truncate    filtered          -> truncated.jsonl
    augment     truncated         -> dataset.jsonl         (needs an endpoint)
    review      truncated         -> reviews.jsonl         (needs an endpoint)
    eval        reviews           -> report.json, verdicts.jsonl, scores.md
    ablate      truncated         -> ablation.jsonl, ablation.md, reviews-<cfg>.jsonl
"""

from __future__ import annotations

import dataclasses
import json
import time
from collections import Counter
from pathlib import Path
from typing import Callable, Sequence

from .augment import (
    GroupStats,
    build_enhancement_query,
    emit_instruction_records,
    sample_variants,
    write_dataset,
)
from .comment_filter import filter_samples, load_rules, semantic_screen
from .config import PipelineConfig
from .errors import (
    CommitNotFound,
    ConfigError,
    DataValidationError,
    BudgetTooSmall,
    DocumentationFile,
    EmptyLabel,
    FileNotFoundAtCommit,
    IncompleteGroup,
    ParseFailed,
    PipelineError,
    SpanOutOfRange,
    StageOrderError,
    StateMismatch,
    UnsupportedLanguage,
)
from .gitstate import commits_touching_file
from .ingest import (
    ProjectStatsAccumulator,
    ReviewEvent,
    filter_projects,
    iter_archive_lines,
    link_fix_commits,
    parse_event_stream,
)
from .llm import (
    CassetteClient,
    ChatClient,
    GenConfig,
    HttpChatClient,
    RecordingClient,
    map_bounded,
)
from .manifest import StageManifest, read_jsonl, write_jsonl, write_manifest
from .metrics import HitVerdict, human_metrics, load_annotations, rater_overlap_kappa
from .reconstruct import ReconstructedSample, reconstruct_sample
from .report import (
    EvalReport,
    aggregate_report,
    render_ablation_markdown,
    render_scores_markdown,
    write_report_jsonl,
)
from .review import ReviewRecord, ablate_steps, judge_comment, normalize_steps
from .review import run_review as review_sample
from .templates import load_bundled
from .tokens import fallback_counter, load_token_counter
from .truncate import TruncatedSample, truncate_sample

EVENTS_FILE = "events.jsonl"
PROJECTS_FILE = "projects.jsonl"
FIXLINKS_FILE = "fixlinks.jsonl"
RECONSTRUCTED_FILE = "reconstructed.jsonl"
FILTERED_FILE = "filtered.jsonl"
TRUNCATED_FILE = "truncated.jsonl"
DATASET_FILE = "dataset.jsonl"
REVIEWS_FILE = "reviews.jsonl"
VERDICTS_FILE = "verdicts.jsonl"
REPORT_FILE = "report.json"
SCORES_FILE = "scores.md"
ABLATION_JSONL = "ablation.jsonl"
ABLATION_MD = "ablation.md"

Sleeper = Callable[[float], None]


def workdir_path(config: PipelineConfig) -> Path:
    path = Path(config.workdir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _require_input(workdir: Path, filename: str, producer: str) -> Path:
    path = workdir / filename
    if not path.exists():
        raise StageOrderError(
            f"missing {filename} in {workdir}; run the {producer!r} stage first"
        )
    return path


def build_client(config: PipelineConfig, offline: bool = False) -> ChatClient:
    """Construct the completion client the configuration describes.

    A configured cassette always wins (replay). Offline mode without a
    cassette is a configuration error; online mode optionally records.
    """
    endpoint = config.endpoint
    if endpoint.cassette:
        return CassetteClient(endpoint.cassette)
    if offline:
        raise ConfigError("offline mode requires endpoint.cassette to replay from")
    client: ChatClient = HttpChatClient(endpoint.base_url)
    if endpoint.record:
        client = RecordingClient(client, endpoint.record)
    return client


def generation_config(config: PipelineConfig) -> GenConfig:
    return GenConfig(
        model=config.endpoint.model,
        temperature=config.augment.temperature,
        top_p=config.augment.top_p,
        max_tokens=config.endpoint.max_tokens,
    )


def review_config(config: PipelineConfig) -> GenConfig:
    return GenConfig(
        model=config.endpoint.model,
        temperature=config.review.temperature,
        max_tokens=config.endpoint.max_tokens,
        seed=config.review.seed,
    )


def judge_config(config: PipelineConfig) -> GenConfig:
    return GenConfig(
        model=config.judge.model,
        temperature=config.judge.temperature,
        max_tokens=config.endpoint.max_tokens,
    )


def token_counter(config: PipelineConfig):
    if config.budget.tokenizer:
        return load_token_counter(config.budget.tokenizer)
    return fallback_counter()


# ---------------------------------------------------------------------------
# ingest


def run_ingest(config: PipelineConfig) -> StageManifest:
    """Archives -> qualifying-project review events inside the time window."""
    workdir = workdir_path(config)
    if not config.archives:
        raise ConfigError("no archives configured; set 'archives' in the config")
    for archive in config.archives:
        if not Path(archive).exists():
            raise ConfigError(f"archive not found: {archive}")

    stats = ProjectStatsAccumulator()
    result = parse_event_stream(iter_archive_lines(config.archives), stats=stats)
    snapshot = stats.snapshot()
    qualifying = filter_projects(
        snapshot, config.thresholds.min_prs, config.thresholds.min_comments
    )
    start, end = config.window.start_at(), config.window.end_at()

    kept: list[ReviewEvent] = []
    drops: Counter[str] = Counter()
    for event in result.events:
        if event.project not in qualifying:
            drops["below-threshold-project"] += 1
            continue
        if not (start <= event.created_at < end):
            drops["outside-window"] += 1
            continue
        kept.append(event)

    write_jsonl(workdir / EVENTS_FILE, (e.to_json_dict() for e in kept))
    write_jsonl(
        workdir / PROJECTS_FILE,
        (
            {
                "project": s.project,
                "pr_count": s.pr_count,
                "review_comment_count": s.review_comment_count,
                "qualifies": s.project in qualifying,
            }
            for s in snapshot
        ),
    )

    extras = {
        "archive_lines": result.total,
        "malformed_lines": result.skipped,
    }
    outputs = [EVENTS_FILE, PROJECTS_FILE]
    if config.repos:
        links = []
        for event in kept:
            repo = config.repos.get(event.project)
            if repo is None:
                continue
            try:
                later = commits_touching_file(repo, event.file_path, event.created_at)
            except PipelineError:
                continue
            link = link_fix_commits(
                event, [(sha, changes) for sha, _when, changes in later]
            )
            if link is not None:
                links.append(link)
        write_jsonl(workdir / FIXLINKS_FILE, (l.to_json_dict() for l in links))
        extras["fix_links"] = len(links)
        outputs.append(FIXLINKS_FILE)

    manifest = StageManifest(
        stage="ingest",
        n_in=len(result.events),
        n_out=len(kept),
        drops=dict(drops),
        extras=extras,
        outputs=tuple(outputs),
    )
    write_manifest(manifest, workdir)
    return manifest


# ---------------------------------------------------------------------------
# reconstruct

_DROP_NAMES = {
    DocumentationFile: "documentation-file",
    UnsupportedLanguage: "unsupported-language",
    ParseFailed: "fragment-parse-failed",
    CommitNotFound: "commit-not-found",
    FileNotFoundAtCommit: "file-not-found-at-commit",
    StateMismatch: "state-mismatch",
    SpanOutOfRange: "span-out-of-range",
}


def _drop_name(exc: DataValidationError) -> str:
    return _DROP_NAMES.get(type(exc), "invalid-sample")


def run_reconstruct(config: PipelineConfig) -> StageManifest:
    """Events -> samples with pre-change context, via the local clones."""
    workdir = workdir_path(config)
    events_path = _require_input(workdir, EVENTS_FILE, "ingest")
    events = [ReviewEvent.from_json_dict(blob) for blob in read_jsonl(events_path)]

    kept: list[ReconstructedSample] = []
    drops: Counter[str] = Counter()
    for event in events:
        repo = config.repos.get(event.project)
        if repo is None:
            drops["no-repo-configured"] += 1
            continue
        try:
            kept.append(reconstruct_sample(event, repo))
        except DataValidationError as exc:
            drops[_drop_name(exc)] += 1

    write_jsonl(workdir / RECONSTRUCTED_FILE, (s.to_json_dict() for s in kept))
    manifest = StageManifest(
        stage="reconstruct",
        n_in=len(events),
        n_out=len(kept),
        drops=dict(drops),
        outputs=(RECONSTRUCTED_FILE,),
    )
    write_manifest(manifest, workdir)
    return manifest


# ---------------------------------------------------------------------------
# filter


def run_filter(
    config: PipelineConfig,
    client: ChatClient | None = None,
    sleep: Sleeper = time.sleep,
) -> StageManifest:
    """Rule-based comment triage plus the optional endpoint screen."""
    workdir = workdir_path(config)
    in_path = _require_input(workdir, RECONSTRUCTED_FILE, "reconstruct")
    samples = [ReconstructedSample.from_json_dict(b) for b in read_jsonl(in_path)]

    rules = load_rules(config.filter.rules)
    screen = None
    if config.filter.semantic and client is not None:
        screen = semantic_screen(
            client, load_bundled("screen.txt"), judge_config(config), sleep=sleep
        )
    outcome = filter_samples(samples, rules, screen)

    write_jsonl(workdir / FILTERED_FILE, (s.to_json_dict() for s in outcome.kept))
    manifest = StageManifest(
        stage="filter",
        n_in=len(samples),
        n_out=len(outcome.kept),
        drops=dict(outcome.dropped),
        outputs=(FILTERED_FILE,),
    )
    write_manifest(manifest, workdir)
    return manifest


# ---------------------------------------------------------------------------
# truncate


def run_truncate(config: PipelineConfig) -> StageManifest:
    """Fit every kept sample's context to the token budget."""
    workdir = workdir_path(config)
    in_path = _require_input(workdir, FILTERED_FILE, "filter")
    samples = [ReconstructedSample.from_json_dict(b) for b in read_jsonl(in_path)]

    counter = token_counter(config)
    kept: list[TruncatedSample] = []
    drops: Counter[str] = Counter()
    for sample in samples:
        try:
            kept.append(
                truncate_sample(
                    sample,
                    counter,
                    budget=config.budget.tokens,
                    margin=config.budget.margin_lines,
                )
            )
        except BudgetTooSmall:
            drops["budget-too-small"] += 1
        except EmptyLabel:
            drops["empty-label"] += 1
        except SpanOutOfRange:
            drops["label-outside-context"] += 1

    write_jsonl(workdir / TRUNCATED_FILE, (s.to_json_dict() for s in kept))
    manifest = StageManifest(
        stage="truncate",
        n_in=len(samples),
        n_out=len(kept),
        drops=dict(drops),
        extras={"truncated": sum(1 for s in kept if s.truncated)},
        outputs=(TRUNCATED_FILE,),
    )
    write_manifest(manifest, workdir)
    return manifest


# ---------------------------------------------------------------------------
# augment


def _load_truncated(workdir: Path) -> list[TruncatedSample]:
    in_path = _require_input(workdir, TRUNCATED_FILE, "truncate")
    return [TruncatedSample.from_json_dict(b) for b in read_jsonl(in_path)]


def run_augment(
    config: PipelineConfig,
    client: ChatClient,
    sleep: Sleeper = time.sleep,
) -> StageManifest:
    """Samples -> n answer variants each, written as dataset.jsonl.

    Groups that cannot fill their variant quota are dropped whole (never
    padded or emitted short) and tallied as ``incomplete-group``.
    """
    workdir = workdir_path(config)
    samples = _load_truncated(workdir)
    queries = [build_enhancement_query(s) for s in samples]
    gen_cfg = generation_config(config)
    aug = config.augment

    def work(query):
        stats = GroupStats()
        variants = sample_variants(
            query,
            client,
            gen_cfg,
            n=aug.n_variants,
            base_seed=aug.base_seed,
            max_attempts=aug.max_attempts,
            dedup=aug.dedup,
            sleep=sleep,
            stats=stats,
        )
        return emit_instruction_records(query, variants), stats

    outcomes = map_bounded(work, queries, max_workers=config.concurrency)

    records = []
    drops: Counter[str] = Counter()
    extras: Counter[str] = Counter()
    for outcome in outcomes:
        if outcome.error is not None:
            if isinstance(outcome.error, IncompleteGroup):
                drops["incomplete-group"] += 1
                continue
            raise outcome.error
        group_records, stats = outcome.value
        records.extend(group_records)
        extras["attempts"] += stats.attempts
        extras["endpoint_failures"] += stats.endpoint_failures
        extras["invalid_answers"] += stats.invalid_answers
        extras["duplicates_redrawn"] += stats.duplicates_redrawn
        extras["duplicate_answers"] += stats.duplicate_answers

    write_dataset(records, workdir / DATASET_FILE)
    manifest = StageManifest(
        stage="augment",
        n_in=len(samples),
        n_out=len(samples) - drops.get("incomplete-group", 0),
        drops=dict(drops),
        extras={"records": len(records), **extras},
        outputs=(DATASET_FILE,),
    )
    write_manifest(manifest, workdir)
    return manifest


# ---------------------------------------------------------------------------
# review


def _review_records(
    samples: Sequence[TruncatedSample],
    client: ChatClient,
    gen_cfg: GenConfig,
    steps: Sequence[str],
    concurrency: int,
    sleep: Sleeper,
) -> list[ReviewRecord]:
    outcomes = map_bounded(
        lambda s: review_sample(s, client, gen_cfg, steps=steps, sleep=sleep),
        samples,
        max_workers=concurrency,
    )
    records = []
    for outcome in outcomes:
        if outcome.error is not None:
            raise outcome.error
        records.append(outcome.value)
    return records


def run_review(
    config: PipelineConfig,
    client: ChatClient,
    steps: Sequence[str] | None = None,
    sleep: Sleeper = time.sleep,
) -> StageManifest:
    """Generate a structured review per sample; failures stay as records."""
    workdir = workdir_path(config)
    samples = _load_truncated(workdir)
    chosen = normalize_steps(steps if steps is not None else config.review.steps)
    records = _review_records(
        samples, client, review_config(config), chosen, config.concurrency, sleep
    )

    write_jsonl(workdir / REVIEWS_FILE, (r.to_json_dict() for r in records))
    failed = [r for r in records if r.failed]
    manifest = StageManifest(
        stage="review",
        n_in=len(samples),
        n_out=len(records),
        extras={
            "failed": len(failed),
            "endpoint_failures": sum(
                1 for r in failed if r.failure.startswith("endpoint:")
            ),
            "parse_failures": sum(
                1 for r in failed if r.failure.startswith("parse:")
            ),
        },
        outputs=(REVIEWS_FILE,),
    )
    write_manifest(manifest, workdir)
    return manifest


# ---------------------------------------------------------------------------
# eval


def _judge_records(
    records: Sequence[ReviewRecord],
    judge_client: ChatClient,
    judge_cfg: GenConfig,
    concurrency: int,
    sleep: Sleeper,
) -> dict[str, HitVerdict]:
    candidates = [
        r for r in records if not r.failed and r.predicted_comment is not None
    ]
    outcomes = map_bounded(
        lambda r: judge_comment(
            r.sample_id,
            r.reference_comment,
            r.predicted_comment,
            judge_client,
            judge_cfg,
            sleep=sleep,
        ),
        candidates,
        max_workers=concurrency,
    )
    verdicts: dict[str, HitVerdict] = {}
    for outcome in outcomes:
        if outcome.error is not None:
            raise outcome.error
        verdicts[outcome.value.sample_id] = outcome.value
    return verdicts


def _with_human_scores(report: EvalReport, annotations_path: str) -> EvalReport:
    annotations = load_annotations(annotations_path)
    hit_pct, valuable_pct = human_metrics(annotations)
    overlap = rater_overlap_kappa(annotations)
    return dataclasses.replace(
        report,
        human_hit_pct=hit_pct,
        human_valuable_pct=valuable_pct,
        kappa=overlap[0] if overlap else None,
        kappa_raters=(overlap[1], overlap[2]) if overlap else None,
    )


def run_eval(
    config: PipelineConfig,
    judge_client: ChatClient,
    sleep: Sleeper = time.sleep,
) -> StageManifest:
    """Score reviews.jsonl: line IoU, judged hit rate, optional human scores."""
    workdir = workdir_path(config)
    in_path = _require_input(workdir, REVIEWS_FILE, "review")
    records = [ReviewRecord.from_json_dict(b) for b in read_jsonl(in_path)]
    if not records:
        raise DataValidationError(f"{in_path} holds no review records")

    verdicts = _judge_records(
        records, judge_client, judge_config(config), config.concurrency, sleep
    )
    report = aggregate_report(
        records,
        verdicts,
        config_name="full",
        iou_agg=config.eval.iou_agg,
        skip_failures=config.eval.skip_failures,
    )
    if config.eval.annotations:
        report = _with_human_scores(report, config.eval.annotations)

    write_jsonl(
        workdir / VERDICTS_FILE,
        (
            {
                "sample_id": v.sample_id,
                "hit": v.hit,
                "parse_failed": v.parse_failed,
                "judge_raw": v.judge_raw,
            }
            for v in sorted(verdicts.values(), key=lambda v: v.sample_id)
        ),
    )
    (workdir / REPORT_FILE).write_text(
        json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    (workdir / SCORES_FILE).write_text(
        render_scores_markdown([report]), encoding="utf-8"
    )

    drops = {"failed-generation": report.n_failed} if config.eval.skip_failures else {}
    manifest = StageManifest(
        stage="eval",
        n_in=report.n_input,
        n_out=report.n_scored,
        drops={k: v for k, v in drops.items() if v},
        extras={"judge_parse_failures": report.judge_parse_failures},
        outputs=(REPORT_FILE, VERDICTS_FILE, SCORES_FILE),
    )
    write_manifest(manifest, workdir)
    return manifest


# ---------------------------------------------------------------------------
# ablate


def run_ablate(
    config: PipelineConfig,
    client: ChatClient,
    judge_client: ChatClient | None = None,
    sleep: Sleeper = time.sleep,
) -> StageManifest:
    """Run the full step grid (all steps plus each single-step removal).

    Every configuration reviews the same samples and is judged the same way;
    the summary table reports each configuration's IoU change against the
    full configuration.
    """
    workdir = workdir_path(config)
    samples = _load_truncated(workdir)
    if not samples:
        raise DataValidationError("no samples to ablate")
    judge_client = judge_client if judge_client is not None else client

    gen_cfg = review_config(config)
    judge_cfg = judge_config(config)
    reports: list[EvalReport] = []
    outputs: list[str] = []
    reviews_total = 0
    for name, steps in ablate_steps():
        records = _review_records(
            samples, client, gen_cfg, steps, config.concurrency, sleep
        )
        reviews_file = f"reviews-{name}.jsonl"
        write_jsonl(workdir / reviews_file, (r.to_json_dict() for r in records))
        outputs.append(reviews_file)
        reviews_total += len(records)
        verdicts = _judge_records(
            records, judge_client, judge_cfg, config.concurrency, sleep
        )
        reports.append(
            aggregate_report(
                records,
                verdicts,
                config_name=name,
                iou_agg=config.eval.iou_agg,
                skip_failures=config.eval.skip_failures,
            )
        )

    write_report_jsonl(reports, workdir / ABLATION_JSONL)
    (workdir / ABLATION_MD).write_text(
        render_ablation_markdown(reports), encoding="utf-8"
    )
    manifest = StageManifest(
        stage="ablate",
        n_in=len(samples),
        n_out=len(samples),
        extras={"configurations": len(reports), "reviews_total": reviews_total},
        outputs=tuple(outputs + [ABLATION_JSONL, ABLATION_MD]),
    )
    write_manifest(manifest, workdir)
    return manifest
