"""Unified-diff parsing and serialization.

The parser understands plain and git-style unified diffs. In ``strict`` mode
(the default) hunk bodies must match their header lengths exactly and the
serializer reproduces the input byte for byte. In ``clip`` mode a hunk body
may stop early, which is how pull-request archives store the fragment shown
next to a review comment: the fragment is cut at the commented line, so the
observed body can be shorter than the header advertises. Clipped hunks get
their lengths recomputed from the observed body.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import DiffParseError

HUNK_HEADER_RE = re.compile(
    r"^@@ -(?P<old_start>\d+)(?:,(?P<old_len>\d+))?"
    r" \+(?P<new_start>\d+)(?:,(?P<new_len>\d+))? @@(?P<heading>.*)$"
)

# Line prefixes that belong to the per-file preamble of a diff.
_FILE_HEADER_PREFIXES = (
    "diff ",
    "index ",
    "--- ",
    "+++ ",
    "old mode",
    "new mode",
    "deleted file mode",
    "new file mode",
    "similarity index",
    "dissimilarity index",
    "rename from",
    "rename to",
    "copy from",
    "copy to",
    "Binary files",
    "GIT binary patch",
)

CONTEXT = "context"
ADDED = "added"
REMOVED = "removed"

_PREFIX_TO_KIND = {" ": CONTEXT, "+": ADDED, "-": REMOVED}
_KIND_TO_PREFIX = {v: k for k, v in _PREFIX_TO_KIND.items()}


@dataclass
class DiffHunk:
    """One ``@@``-delimited change region.

    ``lines`` holds (kind, text) pairs where kind is one of ``context``,
    ``added``, ``removed`` and text excludes the one-character prefix.
    ``meta`` maps a body position (number of body lines already seen) to a
    raw backslash line such as ``\\ No newline at end of file``.
    """

    old_start: int
    old_len: int
    new_start: int
    new_len: int
    lines: list[tuple[str, str]] = field(default_factory=list)
    file_path: str = ""
    heading: str = ""  # raw text after the closing @@, including any space
    explicit_old_len: bool = True  # header spelled out ",<len>"
    explicit_new_len: bool = True
    clipped: bool = False  # body ended before the header counts were met
    meta: dict[int, str] = field(default_factory=dict)

    def old_lines(self) -> list[str]:
        """Texts present on the old side, in order (context + removed)."""
        return [t for k, t in self.lines if k in (CONTEXT, REMOVED)]

    def new_lines(self) -> list[str]:
        """Texts present on the new side, in order (context + added)."""
        return [t for k, t in self.lines if k in (CONTEXT, ADDED)]

    def old_span(self) -> set[int]:
        """1-based old-file line numbers covered by this hunk's body."""
        n = len(self.old_lines())
        return set(range(self.old_start, self.old_start + n))

    def new_span(self) -> set[int]:
        """1-based new-file line numbers covered by this hunk's body."""
        n = len(self.new_lines())
        return set(range(self.new_start, self.new_start + n))


@dataclass
class DiffFileSection:
    """A per-file block: preamble lines plus the hunks that follow them."""

    header_lines: list[str] = field(default_factory=list)
    hunks: list[DiffHunk] = field(default_factory=list)


@dataclass
class ParsedDiff:
    sections: list[DiffFileSection] = field(default_factory=list)
    trailing_newline: bool = True

    @property
    def hunks(self) -> list[DiffHunk]:
        return [h for s in self.sections for h in s.hunks]


@dataclass
class DiffError:
    """A recoverable parse problem, anchored to the offending byte."""

    message: str
    byte_offset: int
    line_number: int  # 1-based


def _strip_path(token: str) -> str:
    path = token.split("\t", 1)[0]
    if path.startswith(("a/", "b/")):
        path = path[2:]
    return path


def parse_unified_diff(text: str, mode: str = "strict") -> ParsedDiff:
    """Parse a unified diff, raising :class:`DiffParseError` on the first problem.

    ``mode="clip"`` tolerates hunk bodies that stop early and recomputes the
    affected lengths; all other problems still raise.
    """
    parsed, errors = parse_unified_diff_detailed(text, mode=mode)
    if errors:
        first = errors[0]
        raise DiffParseError(
            f"{first.message} (line {first.line_number})", byte_offset=first.byte_offset
        )
    return parsed


def parse_unified_diff_detailed(
    text: str, mode: str = "strict"
) -> tuple[ParsedDiff, list[DiffError]]:
    """Parse, collecting errors instead of raising.

    On a malformed hunk the parser records a :class:`DiffError` with the byte
    offset of the offending line and skips ahead to the next hunk or file
    header, so one bad hunk does not take down the rest of the input.
    """
    if mode not in ("strict", "clip"):
        raise ValueError(f"unknown parse mode: {mode!r}")
    if text == "":
        return ParsedDiff(sections=[], trailing_newline=False), []

    lines = text.split("\n")
    trailing_newline = text.endswith("\n")
    if trailing_newline:
        lines = lines[:-1]  # drop the empty tail produced by split

    # Precompute the byte offset of each line start.
    offsets: list[int] = []
    pos = 0
    for ln in lines:
        offsets.append(pos)
        pos += len(ln.encode("utf-8")) + 1

    parsed = ParsedDiff(sections=[], trailing_newline=trailing_newline)
    errors: list[DiffError] = []

    section: DiffFileSection | None = None
    current_path = ""
    hunk: DiffHunk | None = None
    old_rem = new_rem = 0
    skipping = False  # after an error, ignore lines until the next anchor

    def error(msg: str, i: int) -> None:
        errors.append(DiffError(msg, offsets[i], i + 1))

    def finish_hunk(i: int) -> None:
        """Close the open hunk; ``i`` is the line where the next thing starts."""
        nonlocal hunk, old_rem, new_rem
        if hunk is None:
            return
        if old_rem or new_rem:
            if mode == "clip":
                hunk.old_len = len(hunk.old_lines())
                hunk.new_len = len(hunk.new_lines())
                # Recomputed lengths must be spelled out when re-serialized.
                hunk.explicit_old_len = True
                hunk.explicit_new_len = True
                hunk.clipped = True
            else:
                error("hunk body shorter than header lengths", min(i, len(lines) - 1))
                hunk = None
                old_rem = new_rem = 0
                return
        assert section is not None
        section.hunks.append(hunk)
        hunk = None
        old_rem = new_rem = 0

    i = 0
    n = len(lines)
    while i < n:
        line = lines[i]
        header = HUNK_HEADER_RE.match(line)
        is_file_header = line.startswith(_FILE_HEADER_PREFIXES)
        in_hunk = hunk is not None and (old_rem > 0 or new_rem > 0)

        if in_hunk and not header:
            if line[:1] in _PREFIX_TO_KIND:
                kind = _PREFIX_TO_KIND[line[0]]
                assert hunk is not None
                hunk.lines.append((kind, line[1:]))
                if kind in (CONTEXT, REMOVED):
                    old_rem -= 1
                if kind in (CONTEXT, ADDED):
                    new_rem -= 1
                if old_rem < 0 or new_rem < 0:
                    error("hunk body disagrees with header lengths", i)
                    hunk = None
                    old_rem = new_rem = 0
                    skipping = True
                i += 1
                continue
            if line.startswith("\\"):
                assert hunk is not None
                hunk.meta[len(hunk.lines)] = line
                i += 1
                continue
            if mode == "clip":
                finish_hunk(i)
                # fall through: reprocess this line at top level
            else:
                error("hunk body shorter than header lengths", i)
                hunk = None
                old_rem = new_rem = 0
                skipping = True
                i += 1
                continue

        if header:
            finish_hunk(i)
            skipping = False
            if section is None:
                section = DiffFileSection()
                parsed.sections.append(section)
            old_len_s = header.group("old_len")
            new_len_s = header.group("new_len")
            hunk = DiffHunk(
                old_start=int(header.group("old_start")),
                old_len=int(old_len_s) if old_len_s is not None else 1,
                new_start=int(header.group("new_start")),
                new_len=int(new_len_s) if new_len_s is not None else 1,
                file_path=current_path,
                heading=header.group("heading"),
                explicit_old_len=old_len_s is not None,
                explicit_new_len=new_len_s is not None,
            )
            old_rem = hunk.old_len
            new_rem = hunk.new_len
            if old_rem == 0 and new_rem == 0:
                finish_hunk(i)
            i += 1
            continue

        if is_file_header:
            finish_hunk(i)
            skipping = False
            starts_new = line.startswith("diff ") or (
                line.startswith("--- ") and section is not None and section.hunks
            )
            if section is None or starts_new:
                section = DiffFileSection()
                parsed.sections.append(section)
            section.header_lines.append(line)
            if line.startswith("+++ "):
                token = line[4:]
                if token != "/dev/null":
                    current_path = _strip_path(token)
            elif line.startswith("--- "):
                token = line[4:]
                if token != "/dev/null":
                    current_path = _strip_path(token)
            elif line.startswith("\\") and hunk is None:
                pass
            i += 1
            continue

        if line.startswith("\\"):
            # No-newline marker right after a completed hunk. The hunk may
            # still be open (counts just hit zero) or already appended.
            if hunk is not None:
                hunk.meta[len(hunk.lines)] = line
                i += 1
                continue
            if section is not None and section.hunks:
                last = section.hunks[-1]
                last.meta[len(last.lines)] = line
                i += 1
                continue

        if skipping:
            i += 1
            continue

        error(f"unrecognized line outside any hunk: {line[:40]!r}", i)
        skipping = True
        i += 1

    finish_hunk(n)
    return parsed, errors


def serialize_hunk(hunk: DiffHunk) -> str:
    """Render one hunk back to text (no trailing newline).

    Raises ``ValueError`` if an implicit length is not 1, since the grammar
    only allows omitting a length that equals 1.
    """
    if not hunk.explicit_old_len and hunk.old_len != 1:
        raise ValueError("old length may be omitted only when it equals 1")
    if not hunk.explicit_new_len and hunk.new_len != 1:
        raise ValueError("new length may be omitted only when it equals 1")
    old_part = f"-{hunk.old_start}" + (f",{hunk.old_len}" if hunk.explicit_old_len else "")
    new_part = f"+{hunk.new_start}" + (f",{hunk.new_len}" if hunk.explicit_new_len else "")
    out = [f"@@ {old_part} {new_part} @@{hunk.heading}"]
    for idx, (kind, text) in enumerate(hunk.lines):
        if idx in hunk.meta:
            out.append(hunk.meta[idx])
        out.append(_KIND_TO_PREFIX[kind] + text)
    if len(hunk.lines) in hunk.meta:
        out.append(hunk.meta[len(hunk.lines)])
    return "\n".join(out)


def serialize_diff(parsed: ParsedDiff) -> str:
    """Render a parsed diff back to text, byte-identical for strict parses."""
    out: list[str] = []
    for section in parsed.sections:
        out.extend(section.header_lines)
        for hunk in section.hunks:
            out.append(serialize_hunk(hunk))
    text = "\n".join(out)
    if parsed.trailing_newline and text:
        text += "\n"
    return text
