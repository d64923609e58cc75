"""Answer augmentation: many independent answer variants per query.

Each kept review comment becomes one query; a completion endpoint rewrites
the original comment into a structured finding n times, each draw with its
own seed, giving n independently sampled answers per query. The variants are
emitted as instruction-tuning records grouped by query id. Groups that
cannot collect their full complement of valid variants are failed loudly
rather than padded or shortened.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .errors import DataValidationError, EndpointError, IncompleteGroup
from .llm import ChatClient, GenConfig, with_retries
from .templates import load_bundled, render_template
from .truncate import TruncatedSample

DEFAULT_VARIANTS = 10

REQUIRED_MARKERS = ("LOCATION:", "EXPLANATION:", "IMPACT:", "SUGGESTION:")


def number_lines(text: str, start: int = 1) -> str:
    """Prefix each line with its 1-based number (``  3 | code``)."""
    lines = text.split("\n")
    width = len(str(start + len(lines) - 1))
    return "\n".join(
        f"{start + i:>{width}} | {line}" for i, line in enumerate(lines)
    )


@dataclass(frozen=True)
class EnhancementQuery:
    """One sample's generation prompt plus the training-side query text."""

    query_id: str
    prompt: str  # generation prompt (includes the original human comment)
    query_text: str  # training query (no human comment)
    sample: TruncatedSample


def build_enhancement_query(
    sample: TruncatedSample,
    enhance_template: str | None = None,
    query_template: str | None = None,
) -> EnhancementQuery:
    numbered = number_lines(sample.context_text)
    common = {
        "file_path": sample.file_path,
        "language": sample.language,
        "context": numbered,
        "diff": sample.hunk_text,
    }
    prompt = render_template(
        enhance_template or load_bundled("enhance.txt"),
        {**common, "comment": sample.comment_text},
    )
    query_text = render_template(
        query_template or load_bundled("query.txt"), common
    )
    return EnhancementQuery(
        query_id=sample.sample_id, prompt=prompt, query_text=query_text, sample=sample
    )


@dataclass(frozen=True)
class AnswerVariant:
    query_id: str
    variant_index: int
    seed: int
    text: str


def validate_variant(text: str) -> None:
    """Check the four-section answer layout; raise on any violation.

    Every marker must start a line, appear exactly once, in order, and own a
    non-empty body.
    """
    positions = []
    for marker in REQUIRED_MARKERS:
        starts = [
            i
            for i, line in enumerate(text.split("\n"))
            if line.startswith(marker)
        ]
        if len(starts) != 1:
            raise DataValidationError(
                f"answer must contain exactly one {marker} line, found {len(starts)}"
            )
        positions.append(starts[0])
    if positions != sorted(positions):
        raise DataValidationError(
            "answer sections out of order; expected "
            + " then ".join(REQUIRED_MARKERS)
        )
    lines = text.split("\n")
    bounds = positions + [len(lines)]
    for marker, lo, hi in zip(REQUIRED_MARKERS, positions, bounds[1:]):
        body = lines[lo][len(marker) :] + "\n" + "\n".join(lines[lo + 1 : hi])
        if not body.strip():
            raise DataValidationError(f"answer section {marker} is empty")


@dataclass
class GroupStats:
    """Generation bookkeeping for one query's variant group."""

    attempts: int = 0
    endpoint_failures: int = 0
    invalid_answers: int = 0
    duplicates_redrawn: int = 0
    duplicate_answers: int = 0  # duplicates kept (when not re-drawing)


def sample_variants(
    query: EnhancementQuery,
    client: ChatClient,
    config: GenConfig,
    n: int = DEFAULT_VARIANTS,
    base_seed: int = 0,
    max_attempts: int | None = None,
    dedup: bool = False,
    endpoint_attempts: int = 3,
    sleep: Callable[[float], None] = time.sleep,
    stats: GroupStats | None = None,
) -> list[AnswerVariant]:
    """Collect exactly ``n`` valid answer variants for one query.

    Draw j uses seed ``base_seed + j`` counted over *attempts*, so a group's
    seeds depend only on its own retry history — never on scheduling across
    groups. Invalid or failed draws consume an attempt and move to the next
    seed. When ``dedup`` is set, word-for-word repeats of an earlier variant
    are re-drawn as well; otherwise they are kept and counted. Raises
    :class:`IncompleteGroup` when the attempt budget runs out first.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    budget = max_attempts if max_attempts is not None else 3 * n
    stats = stats if stats is not None else GroupStats()
    variants: list[AnswerVariant] = []
    seen: set[str] = set()
    attempt = 0
    while len(variants) < n and attempt < budget:
        seed = base_seed + attempt
        attempt += 1
        stats.attempts += 1
        try:
            text = with_retries(
                lambda: client.complete(query.prompt, config.with_seed(seed)),
                attempts=endpoint_attempts,
                sleep=sleep,
            )
        except EndpointError:
            stats.endpoint_failures += 1
            continue
        try:
            validate_variant(text)
        except DataValidationError:
            stats.invalid_answers += 1
            continue
        if text in seen:
            if dedup:
                stats.duplicates_redrawn += 1
                continue
            stats.duplicate_answers += 1
        seen.add(text)
        variants.append(
            AnswerVariant(
                query_id=query.query_id,
                variant_index=len(variants),
                seed=seed,
                text=text,
            )
        )
    if len(variants) < n:
        raise IncompleteGroup(
            f"query {query.query_id}: collected {len(variants)}/{n} variants "
            f"after {attempt} attempts"
        )
    return variants


@dataclass(frozen=True)
class InstructionRecord:
    """One line of the instruction-tuning dataset."""

    query_id: str
    variant_index: int
    n_variants: int
    seed: int
    instruction: str
    query: str
    answer: str
    meta: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "variant_index": self.variant_index,
            "n_variants": self.n_variants,
            "seed": self.seed,
            "instruction": self.instruction,
            "query": self.query,
            "answer": self.answer,
            "meta": self.meta,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "InstructionRecord":
        return cls(
            query_id=d["query_id"],
            variant_index=int(d["variant_index"]),
            n_variants=int(d["n_variants"]),
            seed=int(d["seed"]),
            instruction=d["instruction"],
            query=d["query"],
            answer=d["answer"],
            meta=dict(d.get("meta", {})),
        )


def emit_instruction_records(
    query: EnhancementQuery,
    variants: Sequence[AnswerVariant],
    instruction_text: str | None = None,
) -> list[InstructionRecord]:
    """Turn one query's variants into dataset records."""
    instruction = (
        instruction_text
        if instruction_text is not None
        else load_bundled("instruction.txt").strip()
    )
    sample = query.sample
    return [
        InstructionRecord(
            query_id=query.query_id,
            variant_index=v.variant_index,
            n_variants=len(variants),
            seed=v.seed,
            instruction=instruction,
            query=query.query_text,
            answer=v.text,
            meta={
                "project": sample.project,
                "language": sample.language,
                "file_path": sample.file_path,
                "label_lines": sorted(sample.label_lines),
            },
        )
        for v in variants
    ]


def write_dataset(records: Iterable[InstructionRecord], path: str | Path) -> None:
    """Serialize records as JSON lines, byte-deterministically."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(
                json.dumps(record.to_json_dict(), ensure_ascii=False, sort_keys=True)
            )
            fh.write("\n")


def read_dataset(path: str | Path) -> list[InstructionRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(InstructionRecord.from_json_dict(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise DataValidationError(
                    f"bad dataset record at {path}:{n}: {exc}", line_numbers=[n]
                ) from exc
    return records


@dataclass
class DatasetReport:
    total_records: int
    groups: int
    n_variants: int
    duplicate_answers: int


def verify_dataset(
    source: str | Path | Sequence[InstructionRecord],
) -> DatasetReport:
    """Validate group structure of a dataset; raise on any violation.

    Checks: consistent group size across the file, exactly the variant
    indexes 0..n-1 in every group, distinct seeds inside a group, the
    four-section answer layout, and non-empty instruction/query texts.
    Word-for-word duplicate answers inside a group are counted but legal.
    """
    if isinstance(source, (str, Path)):
        records = read_dataset(source)
    else:
        records = list(source)
    if not records:
        raise DataValidationError("dataset is empty")
    groups: dict[str, list[InstructionRecord]] = {}
    for record in records:
        groups.setdefault(record.query_id, []).append(record)
    n_variants = records[0].n_variants
    duplicate_answers = 0
    for query_id, group in groups.items():
        if any(r.n_variants != n_variants for r in group):
            raise DataValidationError(
                f"group {query_id}: inconsistent n_variants declarations"
            )
        if len(group) != n_variants:
            raise DataValidationError(
                f"group {query_id}: has {len(group)} records, expected {n_variants}"
            )
        indexes = sorted(r.variant_index for r in group)
        if indexes != list(range(n_variants)):
            raise DataValidationError(
                f"group {query_id}: variant indexes {indexes} != 0..{n_variants - 1}"
            )
        seeds = {r.seed for r in group}
        if len(seeds) != len(group):
            raise DataValidationError(f"group {query_id}: repeated seeds")
        queries = {r.query for r in group}
        if len(queries) != 1:
            raise DataValidationError(
                f"group {query_id}: records disagree on query text"
            )
        texts = set()
        for record in group:
            if not record.instruction.strip() or not record.query.strip():
                raise DataValidationError(
                    f"group {query_id}: empty instruction or query"
                )
            validate_variant(record.answer)
            if record.answer in texts:
                duplicate_answers += 1
            texts.add(record.answer)
    return DatasetReport(
        total_records=len(records),
        groups=len(groups),
        n_variants=n_variants,
        duplicate_answers=duplicate_answers,
    )
