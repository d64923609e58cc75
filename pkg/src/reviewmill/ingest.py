"""Archived review-event ingestion.

Reads newline-delimited event records (plain or gzip), keeps pull-request
review comments, accumulates per-project activity counts, and links comments
to the later commits that modified the commented lines.
"""

from __future__ import annotations

import gzip
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import AbstractSet, Iterable, Iterator, Mapping, Sequence

from .diffs import parse_unified_diff

COMMIT_REF_RE = re.compile(r"^[0-9a-f]{7,40}$")

REVIEW_COMMENT_TYPE = "PullRequestReviewCommentEvent"
PULL_REQUEST_TYPE = "PullRequestEvent"


@dataclass(frozen=True)
class ReviewEvent:
    """One code-anchored review comment from the archive."""

    event_id: str
    project: str  # owner/name
    pr_number: int
    comment_id: str
    comment_text: str
    diff_fragment: str  # unified-diff hunk text, possibly cut at the comment line
    file_path: str
    created_at: datetime  # UTC
    commit_ref: str  # commit the comment anchors to

    def to_json_dict(self) -> dict:
        return {
            "event_id": self.event_id,
            "project": self.project,
            "pr_number": self.pr_number,
            "comment_id": self.comment_id,
            "comment_text": self.comment_text,
            "diff_fragment": self.diff_fragment,
            "file_path": self.file_path,
            "created_at": self.created_at.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "commit_ref": self.commit_ref,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ReviewEvent":
        return cls(
            event_id=d["event_id"],
            project=d["project"],
            pr_number=int(d["pr_number"]),
            comment_id=d["comment_id"],
            comment_text=d["comment_text"],
            diff_fragment=d["diff_fragment"],
            file_path=d["file_path"],
            created_at=parse_timestamp(d["created_at"]),
            commit_ref=d["commit_ref"],
        )


@dataclass(frozen=True)
class ProjectStats:
    project: str
    pr_count: int
    review_comment_count: int


@dataclass(frozen=True)
class FixLink:
    comment_id: str
    fix_commit: str
    overlap_lines: frozenset[int]  # 1-based lines of the commented file

    def to_json_dict(self) -> dict:
        return {
            "comment_id": self.comment_id,
            "fix_commit": self.fix_commit,
            "overlap_lines": sorted(self.overlap_lines),
        }


def parse_timestamp(raw: str) -> datetime:
    """ISO-8601 with a Z or offset suffix, normalized to UTC."""
    text = raw.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


class ProjectStatsAccumulator:
    """Streaming per-project counters.

    Merging accumulators is commutative and associative (PR numbers are kept
    as sets, comment counts as sums), so sharded ingestion reaches the same
    totals in any order.
    """

    def __init__(self) -> None:
        self._prs: dict[str, set[int]] = {}
        self._comments: Counter[str] = Counter()

    def add_pr(self, project: str, pr_number: int) -> None:
        self._prs.setdefault(project, set()).add(pr_number)

    def add_comment(self, project: str) -> None:
        self._comments[project] += 1

    def merge(self, other: "ProjectStatsAccumulator") -> "ProjectStatsAccumulator":
        merged = ProjectStatsAccumulator()
        for src in (self, other):
            for project, prs in src._prs.items():
                merged._prs.setdefault(project, set()).update(prs)
            merged._comments.update(src._comments)
        return merged

    def snapshot(self) -> list[ProjectStats]:
        projects = sorted(set(self._prs) | set(self._comments))
        return [
            ProjectStats(
                project=p,
                pr_count=len(self._prs.get(p, ())),
                review_comment_count=self._comments.get(p, 0),
            )
            for p in projects
        ]


@dataclass
class EventParseResult:
    events: list[ReviewEvent] = field(default_factory=list)
    total: int = 0
    well_formed: int = 0
    skipped: int = 0
    skip_reasons: Counter = field(default_factory=Counter)

    def conserved(self) -> bool:
        return self.well_formed + self.skipped == self.total


def _extract_review_event(record: dict) -> ReviewEvent:
    payload = record["payload"]
    comment = payload["comment"]
    pr_number = int(payload["pull_request"]["number"])
    if pr_number < 1:
        raise ValueError("pr_number must be >= 1")
    body = comment["body"]
    if not isinstance(body, str) or not body.strip():
        raise ValueError("empty comment body")
    diff_hunk = comment["diff_hunk"]
    if not isinstance(diff_hunk, str) or not diff_hunk.strip():
        raise ValueError("empty diff_hunk")
    commit_ref = comment["original_commit_id"]
    if not isinstance(commit_ref, str) or not COMMIT_REF_RE.match(commit_ref):
        raise ValueError(f"bad commit ref: {commit_ref!r}")
    path = comment["path"]
    if not isinstance(path, str) or not path:
        raise ValueError("missing file path")
    return ReviewEvent(
        event_id=str(record["id"]),
        project=record["repo"]["name"],
        pr_number=pr_number,
        comment_id=str(comment["id"]),
        comment_text=body,
        diff_fragment=diff_hunk,
        file_path=path,
        created_at=parse_timestamp(record["created_at"]),
        commit_ref=commit_ref,
    )


def parse_event_stream(
    lines: Iterable[str], stats: ProjectStatsAccumulator | None = None
) -> EventParseResult:
    """Parse one-record-per-line archive text.

    Malformed lines never abort the stream; they are counted in ``skipped``
    with a reason tally. When ``stats`` is given, pull-request and review
    activity is accumulated into it along the way.
    """
    result = EventParseResult()
    for line in lines:
        result.total += 1
        stripped = line.strip()
        if not stripped:
            result.skipped += 1
            result.skip_reasons["blank-line"] += 1
            continue
        try:
            record = json.loads(stripped)
        except json.JSONDecodeError:
            result.skipped += 1
            result.skip_reasons["bad-json"] += 1
            continue
        if not isinstance(record, dict):
            result.skipped += 1
            result.skip_reasons["not-an-object"] += 1
            continue
        rtype = record.get("type")
        if rtype == REVIEW_COMMENT_TYPE:
            try:
                event = _extract_review_event(record)
            except (KeyError, TypeError, ValueError):
                result.skipped += 1
                result.skip_reasons["invalid-review-comment"] += 1
                continue
            result.events.append(event)
            result.well_formed += 1
            if stats is not None:
                stats.add_pr(event.project, event.pr_number)
                stats.add_comment(event.project)
        else:
            # Any other well-formed record passes through uncounted except
            # for project activity.
            result.well_formed += 1
            if stats is not None and rtype == PULL_REQUEST_TYPE:
                try:
                    project = record["repo"]["name"]
                    number = int(record["payload"]["pull_request"]["number"])
                except (KeyError, TypeError, ValueError):
                    pass
                else:
                    stats.add_pr(project, number)
    return result


def iter_archive_lines(paths: Sequence[str | Path]) -> Iterator[str]:
    """Lines of the given archive files, gzip-decompressed when needed."""
    for path in paths:
        path = Path(path)
        if path.suffix == ".gz":
            with gzip.open(path, "rt", encoding="utf-8") as fh:
                yield from fh
        else:
            with open(path, encoding="utf-8") as fh:
                yield from fh


def filter_projects(
    stats: Iterable[ProjectStats], min_prs: int = 1000, min_comments: int = 50
) -> set[str]:
    """Projects meeting both activity thresholds."""
    if min_prs < 0 or min_comments < 0:
        raise ValueError("thresholds must be >= 0")
    return {
        s.project
        for s in stats
        if s.pr_count >= min_prs and s.review_comment_count >= min_comments
    }


def commented_new_span(event: ReviewEvent) -> set[int]:
    """New-file lines covered by the comment's diff fragment."""
    parsed = parse_unified_diff(event.diff_fragment, mode="clip")
    span: set[int] = set()
    for hunk in parsed.hunks:
        span |= hunk.new_span()
        if not hunk.new_lines() and hunk.new_start >= 1:
            span.add(hunk.new_start)
    return span


def link_fix_commits(
    event: ReviewEvent,
    later_commits: Sequence[tuple[str, Mapping[str, AbstractSet[int]]]],
) -> FixLink | None:
    """Earliest later commit touching the commented lines of the same file.

    ``later_commits`` must be ordered by commit time, all strictly later than
    the comment; each entry maps changed files to 1-based changed-line sets.
    Returns None when nothing overlaps.
    """
    span = commented_new_span(event)
    if not span:
        return None
    for commit_id, changes in later_commits:
        changed = changes.get(event.file_path)
        if not changed:
            continue
        overlap = span & set(changed)
        if overlap:
            return FixLink(
                comment_id=event.comment_id,
                fix_commit=commit_id,
                overlap_lines=frozenset(overlap),
            )
    return None
