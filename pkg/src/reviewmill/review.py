"""Structured review generation and output parsing.

Prompts are composed from a sectioned template whose reasoning steps —
summary, key code flows, diff analyze, issue check — can be toggled
individually, which is how the step-ablation grid is produced. Model output
follows a line-oriented format (optional step traces, then ``LINES:`` and
``COMMENT:``) that parses back into structured form; ``format_review_output``
and ``parse_review_output`` are mutually inverse on canonical outputs.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .augment import number_lines
from .errors import EndpointError, ParseFailed
from .llm import ChatClient, GenConfig, with_retries
from .metrics import HitVerdict
from .templates import load_bundled, parse_sections, render_template
from .truncate import TruncatedSample

# Canonical reasoning-step order; ablations remove steps, never reorder them.
STEP_SUMMARY = "summary"
STEP_KEY_CODE_FLOWS = "key_code_flows"
STEP_DIFF_ANALYZE = "diff_analyze"
STEP_ISSUE_CHECK = "issue_check"
CANONICAL_STEPS = (
    STEP_SUMMARY,
    STEP_KEY_CODE_FLOWS,
    STEP_DIFF_ANALYZE,
    STEP_ISSUE_CHECK,
)

_STEP_DISPLAY = {
    STEP_SUMMARY: "Summary",
    STEP_KEY_CODE_FLOWS: "Key code flows",
    STEP_DIFF_ANALYZE: "Diff analyze",
    STEP_ISSUE_CHECK: "Issue check",
}

_STEP_HEADING_RES = {
    STEP_SUMMARY: re.compile(r"^\s*(?:step\s*[—–-]\s*)?summary\s*:\s*(.*)$", re.I),
    STEP_KEY_CODE_FLOWS: re.compile(
        r"^\s*(?:step\s*[—–-]\s*)?key code flows\s*:\s*(.*)$", re.I
    ),
    STEP_DIFF_ANALYZE: re.compile(
        r"^\s*(?:step\s*[—–-]\s*)?diff analy[sz]\w*\s*:\s*(.*)$", re.I
    ),
    STEP_ISSUE_CHECK: re.compile(
        r"^\s*(?:step\s*[—–-]\s*)?issue check\s*:\s*(.*)$", re.I
    ),
}

_LINES_RE = re.compile(r"^\s*lines\s*:\s*(.*)$", re.I)
_COMMENT_RE = re.compile(r"^\s*comment\s*:\s*(.*)$", re.I)
_RANGE_RE = re.compile(r"^(\d+)(?:\s*-\s*(\d+))?$")


def normalize_steps(steps: Sequence[str]) -> tuple[str, ...]:
    """Validate step names and return them in canonical order."""
    wanted = set(steps)
    unknown = wanted - set(CANONICAL_STEPS)
    if unknown:
        raise ValueError(f"unknown reasoning steps: {sorted(unknown)}")
    return tuple(s for s in CANONICAL_STEPS if s in wanted)


def ablate_steps() -> list[tuple[str, tuple[str, ...]]]:
    """The standard ablation grid: all steps, then each single step removed."""
    grid: list[tuple[str, tuple[str, ...]]] = [("full", CANONICAL_STEPS)]
    for step in CANONICAL_STEPS:
        kept = tuple(s for s in CANONICAL_STEPS if s != step)
        grid.append((f"no_{step}", kept))
    return grid


def build_review_prompt(
    sample: TruncatedSample,
    steps: Sequence[str] = CANONICAL_STEPS,
    template_text: str | None = None,
) -> str:
    """Compose the review prompt with the selected reasoning steps."""
    sections = parse_sections(template_text or load_bundled("longcot.txt"))
    for required in ("preamble", "answer"):
        if required not in sections:
            raise ParseFailed(f"review template lacks [[{required}]] section")
    chosen = normalize_steps(steps)
    parts = [
        render_template(
            sections["preamble"],
            {
                "file_path": sample.file_path,
                "language": sample.language,
                "context": number_lines(sample.context_text),
                "diff": sample.hunk_text,
            },
        )
    ]
    for step in chosen:
        key = f"step:{step}"
        if key not in sections:
            raise ParseFailed(f"review template lacks [[{key}]] section")
        parts.append(sections[key])
    parts.append(sections["answer"])
    return "\n\n".join(parts)


@dataclass(frozen=True)
class ReviewOutput:
    """Parsed model output: step traces plus the final finding."""

    lines: frozenset[int]
    comment: str
    step_traces: Mapping[str, str] = field(default_factory=dict)


def parse_line_list(value: str) -> frozenset[int]:
    """Parse ``12, 40-44`` (or ``none``) into a set of line numbers."""
    value = value.strip().rstrip(".")
    if not value:
        raise ParseFailed("empty line list")
    if value.lower() == "none":
        return frozenset()
    lines: set[int] = set()
    for token in value.split(","):
        token = token.strip()
        match = _RANGE_RE.match(token)
        if not match:
            raise ParseFailed(f"bad line token: {token!r}")
        start = int(match.group(1))
        end = int(match.group(2)) if match.group(2) else start
        if start < 1 or end < start:
            raise ParseFailed(f"bad line range: {token!r}")
        lines.update(range(start, end + 1))
    return frozenset(lines)


def format_line_list(lines: frozenset[int] | set[int]) -> str:
    """Render a line set canonically: sorted, runs collapsed (``12, 40-44``)."""
    if not lines:
        return "none"
    ordered = sorted(lines)
    runs: list[tuple[int, int]] = []
    for n in ordered:
        if runs and n == runs[-1][1] + 1:
            runs[-1] = (runs[-1][0], n)
        else:
            runs.append((n, n))
    return ", ".join(str(a) if a == b else f"{a}-{b}" for a, b in runs)


def parse_review_output(text: str) -> ReviewOutput:
    """Parse raw model output; raise :class:`ParseFailed` when unusable.

    Both ``LINES:`` and ``COMMENT:`` must be present at line starts. Step
    traces are optional; each runs from its heading to the next marker.
    """
    lines = text.split("\n")
    markers: list[tuple[int, str, str]] = []  # (line index, kind, first text)
    for i, line in enumerate(lines):
        match = _LINES_RE.match(line)
        if match:
            markers.append((i, "lines", match.group(1)))
            continue
        match = _COMMENT_RE.match(line)
        if match:
            markers.append((i, "comment", match.group(1)))
            continue
        for step, heading_re in _STEP_HEADING_RES.items():
            match = heading_re.match(line)
            if match:
                markers.append((i, f"step:{step}", match.group(1)))
                break

    def block(start_idx: int, first: str) -> str:
        next_starts = [i for i, _, _ in markers if i > start_idx]
        end = min(next_starts) if next_starts else len(lines)
        chunk = [first] + lines[start_idx + 1 : end]
        return "\n".join(chunk).strip("\n").strip()

    lines_values = [(i, first) for i, kind, first in markers if kind == "lines"]
    comment_values = [(i, first) for i, kind, first in markers if kind == "comment"]
    if not lines_values:
        raise ParseFailed("output has no LINES: field")
    if not comment_values:
        raise ParseFailed("output has no COMMENT: field")
    line_idx, line_first = lines_values[0]
    line_set = parse_line_list(block(line_idx, line_first))
    comment_idx, comment_first = comment_values[0]
    comment = block(comment_idx, comment_first)
    if not comment:
        raise ParseFailed("COMMENT: field is empty")
    traces = {}
    for i, kind, first in markers:
        if kind.startswith("step:"):
            step = kind.split(":", 1)[1]
            if step not in traces:
                traces[step] = block(i, first)
    return ReviewOutput(lines=line_set, comment=comment, step_traces=traces)


def format_review_output(output: ReviewOutput) -> str:
    """Render parsed output canonically; inverse of :func:`parse_review_output`."""
    parts = []
    for step in CANONICAL_STEPS:
        trace = output.step_traces.get(step, "")
        if trace.strip():
            parts.append(f"{_STEP_DISPLAY[step]}: {trace.strip()}")
    parts.append(f"LINES: {format_line_list(output.lines)}")
    parts.append(f"COMMENT: {output.comment.strip()}")
    return "\n".join(parts)


@dataclass(frozen=True)
class ReviewRecord:
    """One sample's review attempt, self-contained for evaluation."""

    sample_id: str
    steps: tuple[str, ...]
    label_lines: frozenset[int]
    reference_comment: str
    raw_output: str = ""
    predicted_lines: frozenset[int] | None = None
    predicted_comment: str | None = None
    failed: bool = False
    failure: str = ""

    def to_json_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "steps": list(self.steps),
            "label_lines": sorted(self.label_lines),
            "reference_comment": self.reference_comment,
            "raw_output": self.raw_output,
            "predicted_lines": (
                sorted(self.predicted_lines)
                if self.predicted_lines is not None
                else None
            ),
            "predicted_comment": self.predicted_comment,
            "failed": self.failed,
            "failure": self.failure,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ReviewRecord":
        predicted = d.get("predicted_lines")
        return cls(
            sample_id=d["sample_id"],
            steps=tuple(d["steps"]),
            label_lines=frozenset(int(x) for x in d["label_lines"]),
            reference_comment=d["reference_comment"],
            raw_output=d.get("raw_output", ""),
            predicted_lines=(
                frozenset(int(x) for x in predicted) if predicted is not None else None
            ),
            predicted_comment=d.get("predicted_comment"),
            failed=bool(d.get("failed", False)),
            failure=d.get("failure", ""),
        )


def run_review(
    sample: TruncatedSample,
    client: ChatClient,
    config: GenConfig,
    steps: Sequence[str] = CANONICAL_STEPS,
    template_text: str | None = None,
    endpoint_attempts: int = 3,
    sleep: Callable[[float], None] = time.sleep,
) -> ReviewRecord:
    """Generate and parse one review; failures produce a failed record."""
    chosen = normalize_steps(steps)
    prompt = build_review_prompt(sample, chosen, template_text)
    base = dict(
        sample_id=sample.sample_id,
        steps=chosen,
        label_lines=sample.label_lines,
        reference_comment=sample.comment_text,
    )
    try:
        raw = with_retries(
            lambda: client.complete(prompt, config),
            attempts=endpoint_attempts,
            sleep=sleep,
        )
    except EndpointError as exc:
        return ReviewRecord(**base, failed=True, failure=f"endpoint: {exc}")
    try:
        parsed = parse_review_output(raw)
    except ParseFailed as exc:
        return ReviewRecord(
            **base, raw_output=raw, failed=True, failure=f"parse: {exc}"
        )
    return ReviewRecord(
        **base,
        raw_output=raw,
        predicted_lines=parsed.lines,
        predicted_comment=parsed.comment,
    )


_YES_NO_RE = re.compile(r"\b(YES|NO)\b")


def judge_comment(
    sample_id: str,
    reference: str,
    candidate: str,
    client: ChatClient,
    config: GenConfig,
    template_text: str | None = None,
    endpoint_attempts: int = 3,
    sleep: Callable[[float], None] = time.sleep,
) -> HitVerdict:
    """Ask the judge whether ``candidate`` raises the same issue as ``reference``.

    Failures never abort evaluation: an unreachable endpoint or an
    unparseable verdict yields a miss flagged ``parse_failed``.
    """
    prompt = render_template(
        template_text or load_bundled("judge.txt"),
        {"reference": reference, "candidate": candidate},
    )
    try:
        raw = with_retries(
            lambda: client.complete(prompt, config),
            attempts=endpoint_attempts,
            sleep=sleep,
        )
    except EndpointError as exc:
        return HitVerdict(
            sample_id=sample_id,
            hit=False,
            judge_raw=f"<endpoint failure: {exc}>",
            parse_failed=True,
        )
    match = _YES_NO_RE.search(raw.upper())
    if match is None:
        return HitVerdict(
            sample_id=sample_id, hit=False, judge_raw=raw, parse_failed=True
        )
    return HitVerdict(
        sample_id=sample_id, hit=match.group(1) == "YES", judge_raw=raw
    )
