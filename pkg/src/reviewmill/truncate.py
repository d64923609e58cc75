"""Token-budget truncation of reconstructed contexts.

A context that fits the token budget passes through unchanged. One that does
not is cut down to the commented hunk region plus exactly three context lines
on each side (fewer only where the enclosing unit itself ends). Line-anchored
data (labels, the hunk region) is re-expressed in the coordinates of the
truncated text so that downstream prompts and metrics agree on numbering.
"""

from __future__ import annotations

from dataclasses import dataclass

from .diffs import parse_unified_diff
from .errors import BudgetTooSmall, EmptyLabel, SpanOutOfRange
from .reconstruct import ReconstructedSample
from .tokens import TokenCounter

DEFAULT_BUDGET = 1000
DEFAULT_MARGIN = 3


@dataclass(frozen=True)
class TruncationResult:
    """Outcome of windowing a block of lines around a region."""

    lines: tuple[str, ...]
    region: tuple[int, int]  # 1-based within ``lines``
    labels: frozenset[int]  # 1-based within ``lines``
    origin_offset: int  # input line number of output line 1, minus 1
    truncated: bool


def compute_window(
    total_lines: int, region: tuple[int, int], margin: int = DEFAULT_MARGIN
) -> tuple[int, int]:
    """The window kept around ``region``: margin lines each side, clipped."""
    start, end = region
    if not (1 <= start <= end <= total_lines):
        raise SpanOutOfRange(
            f"region {region} outside 1..{total_lines}"
        )
    return max(1, start - margin), min(total_lines, end + margin)


def truncate_lines(
    lines: list[str] | tuple[str, ...],
    region: tuple[int, int],
    labels: frozenset[int] | set[int],
    counter: TokenCounter,
    budget: int = DEFAULT_BUDGET,
    margin: int = DEFAULT_MARGIN,
) -> TruncationResult:
    """Window ``lines`` around ``region`` if they exceed ``budget`` tokens.

    Raises :class:`BudgetTooSmall` when even the minimal window exceeds the
    budget, :class:`EmptyLabel` for an empty label set, and
    :class:`SpanOutOfRange` when the region or labels fall outside the text.
    """
    if budget < 1:
        raise BudgetTooSmall(f"budget must be >= 1, got {budget}")
    if not labels:
        raise EmptyLabel("cannot truncate a sample with no labeled lines")
    lines = tuple(lines)
    total = len(lines)
    if not all(1 <= n <= total for n in labels):
        raise SpanOutOfRange(f"labels {sorted(labels)} outside 1..{total}")
    full_text = "\n".join(lines)
    if counter.count(full_text) <= budget:
        return TruncationResult(
            lines=lines,
            region=region,
            labels=frozenset(labels),
            origin_offset=0,
            truncated=False,
        )
    lo, hi = compute_window(total, region, margin)
    kept = lines[lo - 1 : hi]
    window_text = "\n".join(kept)
    if counter.count(window_text) > budget:
        raise BudgetTooSmall(
            f"minimal window of {len(kept)} lines exceeds budget {budget}"
        )
    offset = lo - 1
    new_labels = frozenset(n - offset for n in labels if lo <= n <= hi)
    if len(new_labels) != len(labels):
        raise SpanOutOfRange(
            "labeled lines fall outside the truncation window"
        )
    return TruncationResult(
        lines=kept,
        region=(region[0] - offset, region[1] - offset),
        labels=new_labels,
        origin_offset=offset,
        truncated=True,
    )


@dataclass(frozen=True)
class TruncatedSample:
    """A reconstructed sample with its context fitted to the token budget.

    All line numbers (``diff_span``, ``label_lines``) are 1-based into
    ``context_text``; ``context_origin`` is the pre-change-file line number
    of the first context line, for mapping back.
    """

    sample_id: str
    project: str
    commit_ref: str
    file_path: str
    language: str
    comment_text: str
    hunk_text: str
    context_text: str
    context_origin: int
    diff_span: tuple[int, int]
    label_lines: frozenset[int]
    truncated: bool
    token_count: int

    def to_json_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "project": self.project,
            "commit_ref": self.commit_ref,
            "file_path": self.file_path,
            "language": self.language,
            "comment_text": self.comment_text,
            "hunk_text": self.hunk_text,
            "context_text": self.context_text,
            "context_origin": self.context_origin,
            "diff_span": list(self.diff_span),
            "label_lines": sorted(self.label_lines),
            "truncated": self.truncated,
            "token_count": self.token_count,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "TruncatedSample":
        return cls(
            sample_id=d["sample_id"],
            project=d["project"],
            commit_ref=d["commit_ref"],
            file_path=d["file_path"],
            language=d["language"],
            comment_text=d["comment_text"],
            hunk_text=d["hunk_text"],
            context_text=d["context_text"],
            context_origin=int(d["context_origin"]),
            diff_span=(int(d["diff_span"][0]), int(d["diff_span"][1])),
            label_lines=frozenset(int(x) for x in d["label_lines"]),
            truncated=bool(d["truncated"]),
            token_count=int(d["token_count"]),
        )


def truncate_sample(
    sample: ReconstructedSample,
    counter: TokenCounter,
    budget: int = DEFAULT_BUDGET,
    margin: int = DEFAULT_MARGIN,
) -> TruncatedSample:
    """Fit one reconstructed sample to the token budget."""
    ctx_lines = sample.context.source_text.split("\n")
    offset = sample.context.start_line - 1  # file coords -> local coords
    labels_local = frozenset(n - offset for n in sample.label_lines)
    region_local = (min(labels_local), max(labels_local))
    result = truncate_lines(
        ctx_lines, region_local, labels_local, counter, budget=budget, margin=margin
    )
    context_text = "\n".join(result.lines)
    return TruncatedSample(
        sample_id=sample.sample_id,
        project=sample.project,
        commit_ref=sample.commit_ref,
        file_path=sample.file_path,
        language=sample.language,
        comment_text=sample.comment_text,
        hunk_text=sample.hunk_text,
        context_text=context_text,
        context_origin=sample.context.start_line + result.origin_offset,
        diff_span=result.region,
        label_lines=result.labels,
        truncated=result.truncated,
        token_count=counter.count(context_text),
    )


def check_hunk_lines_verbatim(sample: TruncatedSample) -> bool:
    """True when the hunk's old-side lines appear verbatim at ``diff_span``."""
    hunk = parse_unified_diff(sample.hunk_text, mode="clip").hunks[-1]
    old_lines = hunk.old_lines()
    ctx_lines = sample.context_text.split("\n")
    lo, hi = sample.diff_span
    if old_lines:
        return ctx_lines[lo - 1 : hi] == old_lines
    return 1 <= lo <= len(ctx_lines)
