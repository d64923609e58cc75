"""Pre-commit file state lookup through git plumbing.

Review comments anchor to the commit that *introduced* a change, so the
reviewed code is the file as it stood in that commit's parent. These helpers
recover that text from a local clone and verify the commented hunk against
it.
"""

from __future__ import annotations

import subprocess
from datetime import datetime, timezone
from pathlib import Path

from .diffs import DiffHunk, parse_unified_diff_detailed
from .errors import CommitNotFound, FileNotFoundAtCommit, StateMismatch


def _git(repo_path: str | Path, *args: str) -> subprocess.CompletedProcess:
    return subprocess.run(
        ["git", *args],
        cwd=str(repo_path),
        capture_output=True,
        text=False,
        check=False,
    )


def _git_text(repo_path: str | Path, *args: str) -> str:
    proc = _git(repo_path, *args)
    return proc.stdout.decode("utf-8", errors="replace")


def resolve_commit(repo_path: str | Path, commit_ref: str) -> str:
    """Full object id for ``commit_ref``; CommitNotFound when absent."""
    proc = _git(repo_path, "rev-parse", "--verify", "--quiet", f"{commit_ref}^{{commit}}")
    if proc.returncode != 0:
        raise CommitNotFound(f"commit {commit_ref} not present in {repo_path}")
    return proc.stdout.decode("ascii").strip()


def locate_precommit_state(
    repo_path: str | Path, commit_ref: str, file_path: str
) -> str:
    """Text of ``file_path`` at the parent of ``commit_ref``.

    Raises CommitNotFound for an unknown commit, StateMismatch when the
    commit's parent is unavailable (truncated history), and
    FileNotFoundAtCommit when the file does not exist in the parent tree.
    """
    commit_id = resolve_commit(repo_path, commit_ref)
    parent = _git(repo_path, "rev-parse", "--verify", "--quiet", f"{commit_id}^")
    if parent.returncode != 0:
        raise StateMismatch(
            f"commit {commit_ref} has no reachable parent (truncated history?)"
        )
    parent_id = parent.stdout.decode("ascii").strip()
    exists = _git(repo_path, "cat-file", "-e", f"{parent_id}:{file_path}")
    if exists.returncode != 0:
        raise FileNotFoundAtCommit(
            f"{file_path} not present at {parent_id[:12]} (parent of {commit_ref})"
        )
    return _git_text(repo_path, "cat-file", "blob", f"{parent_id}:{file_path}")


def anchor_old_lines(file_text: str, hunk: DiffHunk) -> tuple[int, int]:
    """1-based (start, end) where the hunk's old-side lines sit in the file.

    The declared ``old_start`` is tried first; if the text there differs, a
    unique verbatim occurrence elsewhere is accepted (headers of archived
    fragments can drift when the fragment was cut). Anything else — missing
    or ambiguous — raises StateMismatch. Pure insertions anchor to the single
    line at the insertion point.
    """
    file_lines = file_text.split("\n")
    if file_lines and file_lines[-1] == "":
        file_lines = file_lines[:-1]
    old_lines = hunk.old_lines()
    if not old_lines:
        anchor = min(max(hunk.old_start, 1), max(len(file_lines), 1))
        return anchor, anchor
    k = len(old_lines)

    def matches_at(idx: int) -> bool:  # idx is 0-based
        return file_lines[idx : idx + k] == old_lines

    declared = hunk.old_start - 1
    if 0 <= declared <= len(file_lines) - k and matches_at(declared):
        return hunk.old_start, hunk.old_start + k - 1
    hits = [i for i in range(len(file_lines) - k + 1) if matches_at(i)]
    if len(hits) == 1:
        start = hits[0] + 1
        return start, start + k - 1
    if not hits:
        raise StateMismatch(
            f"hunk old-side lines not found in file state (declared line {hunk.old_start})"
        )
    raise StateMismatch(
        f"hunk old-side lines ambiguous: {len(hits)} occurrences, none at declared line"
    )


def commits_touching_file(
    repo_path: str | Path, file_path: str, since: datetime
) -> list[tuple[str, datetime, dict[str, set[int]]]]:
    """Commits after ``since`` that changed ``file_path``, oldest first.

    Each entry carries the changed old-side line sets per file, i.e. the
    lines of the *pre-commit* file the commit removed or replaced (pure
    insertions contribute their insertion-point line).
    """
    out = _git_text(
        repo_path,
        "log",
        "--reverse",
        "--format=%H %ct",
        "--",
        file_path,
    )
    results: list[tuple[str, datetime, dict[str, set[int]]]] = []
    for line in out.splitlines():
        if not line.strip():
            continue
        sha, raw_ts = line.split()
        when = datetime.fromtimestamp(int(raw_ts), tz=timezone.utc)
        if when <= since:
            continue
        results.append((sha, when, commit_changed_lines(repo_path, sha)))
    return results


def commit_changed_lines(repo_path: str | Path, commit_id: str) -> dict[str, set[int]]:
    """Old-side changed lines per file for one commit (zero-context diff).

    Unparseable parts of the diff (combined merge diffs, binary payloads) are
    ignored rather than fatal; linking works from whatever hunks parse.
    """
    text = _git_text(
        repo_path,
        "show",
        "--unified=0",
        "--format=",
        "--no-color",
        commit_id,
    ).lstrip("\n")
    changed: dict[str, set[int]] = {}
    parsed, _errors = parse_unified_diff_detailed(text, mode="strict")
    for section in parsed.sections:
        for hunk in section.hunks:
            if hunk.file_path is None:
                continue
            lines = changed.setdefault(hunk.file_path, set())
            if hunk.old_len > 0:
                lines.update(range(hunk.old_start, hunk.old_start + hunk.old_len))
            else:
                lines.add(max(hunk.old_start, 1))
    return changed
