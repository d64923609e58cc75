"""Context reconstruction for review comments.

An archived review comment carries only a cut-off diff fragment. This module
rebuilds what the reviewer actually saw: the file as it stood before the
commented change, and the innermost syntactic unit (function, class-like
block, or whole file) that encloses the commented lines.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .diffs import parse_unified_diff, serialize_hunk
from .enclosure import (
    EnclosingContext,
    extract_enclosure,
    is_doc_path,
    language_for_path,
)
from .errors import DocumentationFile, ParseFailed, UnsupportedLanguage
from .gitstate import anchor_old_lines, locate_precommit_state
from .ingest import ReviewEvent


@dataclass(frozen=True)
class ReconstructedSample:
    """A review comment with its pre-change context restored."""

    sample_id: str
    project: str
    commit_ref: str
    file_path: str
    language: str
    comment_text: str
    hunk_text: str  # re-serialized fragment, old_start corrected to the anchor
    context: EnclosingContext
    label_lines: frozenset[int]  # 1-based lines of the pre-change file

    def to_json_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "project": self.project,
            "commit_ref": self.commit_ref,
            "file_path": self.file_path,
            "language": self.language,
            "comment_text": self.comment_text,
            "hunk_text": self.hunk_text,
            "context": {
                "unit_kind": self.context.unit_kind,
                "start_line": self.context.start_line,
                "end_line": self.context.end_line,
                "text": self.context.source_text,
            },
            "label_lines": sorted(self.label_lines),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ReconstructedSample":
        ctx = d["context"]
        return cls(
            sample_id=d["sample_id"],
            project=d["project"],
            commit_ref=d["commit_ref"],
            file_path=d["file_path"],
            language=d["language"],
            comment_text=d["comment_text"],
            hunk_text=d["hunk_text"],
            context=EnclosingContext(
                unit_kind=ctx["unit_kind"],
                start_line=int(ctx["start_line"]),
                end_line=int(ctx["end_line"]),
                source_text=ctx["text"],
                language=d["language"],
            ),
            label_lines=frozenset(int(x) for x in d["label_lines"]),
        )


def reconstruct_sample(event: ReviewEvent, repo_path: str | Path) -> ReconstructedSample:
    """Rebuild the reviewed context for one comment.

    Raises the typed errors of :mod:`reviewmill.errors` when the comment
    cannot be reconstructed (documentation file, unsupported language,
    unparseable fragment, missing commit or file, unanchorable hunk). The
    stage runner turns each error class into a drop tally.
    """
    if is_doc_path(event.file_path):
        raise DocumentationFile(f"documentation file: {event.file_path}")
    language = language_for_path(event.file_path)
    if language is None:
        raise UnsupportedLanguage(f"no scanner for: {event.file_path}")

    fragment = parse_unified_diff(event.diff_fragment, mode="clip")
    if not fragment.hunks:
        raise ParseFailed("diff fragment contains no hunks")
    # Archived fragments are cut at the commented line, so the comment always
    # refers to the final hunk of the fragment.
    hunk = fragment.hunks[-1]

    old_text = locate_precommit_state(repo_path, event.commit_ref, event.file_path)
    start, end = anchor_old_lines(old_text, hunk)
    if start != hunk.old_start:
        hunk.old_start = start  # header drifted; trust the verbatim anchor

    context = extract_enclosure(old_text, language, (start, end))
    return ReconstructedSample(
        sample_id=event.comment_id,
        project=event.project,
        commit_ref=event.commit_ref,
        file_path=event.file_path,
        language=language,
        comment_text=event.comment_text,
        hunk_text=serialize_hunk(hunk),
        context=context,
        label_lines=frozenset(range(start, end + 1)),
    )
