"""Locate the innermost syntactic unit enclosing a line span.

Python files are parsed with the stdlib ``ast`` module. The brace languages
(Java, C, C++, JavaScript, TypeScript, Go) go through a comment/string-aware
brace scanner: string and comment contents are masked out, then braces at
top nesting level open units whose kind is decided by classifying the header
text in front of the ``{``.

The scanner covers the common shape of each language. Documented gaps (all
classified as plain blocks, never misattributed): C++ operator overloads and
raw string literals, arrow functions nested inside call arguments, and
preprocessor conditionals that unbalance braces (those fail the parse and
drop the sample rather than guessing).
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass

from .errors import ParseFailed, SpanOutOfRange

FUNCTION = "function"
CLASS_LIKE = "class_like"
MODULE_SCOPE = "module_scope"

SUPPORTED_LANGUAGES = ("java", "python", "c", "cpp", "javascript", "typescript", "go")

EXTENSION_LANGUAGE = {
    ".py": "python",
    ".pyi": "python",
    ".java": "java",
    ".c": "c",
    ".h": "c",
    ".cc": "cpp",
    ".cpp": "cpp",
    ".cxx": "cpp",
    ".hpp": "cpp",
    ".hh": "cpp",
    ".js": "javascript",
    ".jsx": "javascript",
    ".mjs": "javascript",
    ".cjs": "javascript",
    ".ts": "typescript",
    ".tsx": "typescript",
    ".go": "go",
}

# Extensions we recognize as documentation; used by the pipeline's language gate.
DOC_EXTENSIONS = (".md", ".rst", ".txt", ".adoc", ".markdown")


@dataclass(frozen=True)
class SourceUnit:
    kind: str  # function | class_like
    start_line: int
    end_line: int


@dataclass(frozen=True)
class EnclosingContext:
    unit_kind: str  # function | class_like | module_scope
    start_line: int  # 1-based, inclusive
    end_line: int
    source_text: str
    language: str


def language_for_path(path: str) -> str | None:
    """Map a file path to a supported language name, or None."""
    dot = path.rfind(".")
    if dot == -1:
        return None
    return EXTENSION_LANGUAGE.get(path[dot:].lower())


def is_doc_path(path: str) -> bool:
    return path.lower().endswith(DOC_EXTENSIONS)


# ---------------------------------------------------------------------------
# Python: exact spans straight from the AST.


def _scan_python(text: str) -> list[SourceUnit]:
    try:
        tree = ast.parse(text)
    except (SyntaxError, ValueError) as exc:
        raise ParseFailed(f"python parse failed: {exc}") from exc
    units: list[SourceUnit] = []
    for node in ast.walk(tree):
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            units.append(SourceUnit(FUNCTION, node.lineno, node.end_lineno or node.lineno))
        elif isinstance(node, ast.ClassDef):
            units.append(SourceUnit(CLASS_LIKE, node.lineno, node.end_lineno or node.lineno))
    return units


# ---------------------------------------------------------------------------
# Brace languages: sanitize, then scan.


def _sanitize(text: str, language: str) -> str:
    """Replace comment and string contents (and C preprocessor lines) with
    spaces, preserving newlines and every character position."""
    out = list(text)
    n = len(text)
    i = 0
    raw_backtick = language == "go"  # Go raw strings have no escapes
    has_backtick = language in ("go", "javascript", "typescript")
    preprocessor = language in ("c", "cpp")
    at_line_start = True

    def mask(j: int) -> None:
        if out[j] != "\n":
            out[j] = " "

    while i < n:
        ch = text[i]
        nxt = text[i + 1] if i + 1 < n else ""

        if preprocessor and at_line_start and ch in " \t#":
            # Look ahead: is the first non-blank char a '#'?
            j = i
            while j < n and text[j] in " \t":
                j += 1
            if j < n and text[j] == "#":
                while j < n:
                    if text[j] == "\n":
                        if j > 0 and text[j - 1] == "\\":
                            mask(j - 1)
                            j += 1
                            continue
                        break
                    mask(j)
                    j += 1
                i = j
                at_line_start = True
                i += 1 if i < n else 0
                continue

        at_line_start = ch == "\n"

        if ch == "/" and nxt == "/":
            while i < n and text[i] != "\n":
                mask(i)
                i += 1
            continue
        if ch == "/" and nxt == "*":
            mask(i)
            mask(i + 1)
            i += 2
            while i < n:
                if text[i] == "*" and i + 1 < n and text[i + 1] == "/":
                    mask(i)
                    mask(i + 1)
                    i += 2
                    break
                mask(i)
                i += 1
            continue
        if ch in ('"', "'") or (ch == "`" and has_backtick):
            quote = ch
            raw = quote == "`" and raw_backtick
            i += 1  # keep the opening quote visible
            while i < n:
                if not raw and text[i] == "\\" and i + 1 < n:
                    mask(i)
                    mask(i + 1)
                    i += 2
                    continue
                if text[i] == quote:
                    i += 1
                    break
                if text[i] == "\n" and quote != "`":
                    break  # unterminated single-line literal; stop masking
                mask(i)
                i += 1
            continue
        i += 1
    return "".join(out)


_IDENT_RE = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*")

_CONTROL_KEYWORDS = {
    "java": {"if", "else", "for", "while", "switch", "catch", "do", "try", "finally", "synchronized", "return", "assert", "throw"},
    "c": {"if", "else", "for", "while", "switch", "do", "return", "sizeof"},
    "cpp": {"if", "else", "for", "while", "switch", "catch", "do", "try", "return", "sizeof", "alignof", "constexpr"},
    "javascript": {"if", "else", "for", "while", "switch", "catch", "do", "try", "finally", "return", "with", "typeof", "await", "yield", "void"},
    "typescript": {"if", "else", "for", "while", "switch", "catch", "do", "try", "finally", "return", "with", "typeof", "await", "yield", "void"},
}

_CLASS_KEYWORDS = {
    "java": re.compile(r"(?<![\w.])(class|interface|enum|record)\b"),
    "c": re.compile(r"(?<![\w.])(struct|union|enum)\b"),
    "cpp": re.compile(r"(?<![\w.])(class|struct|union|enum|namespace)\b"),
    "javascript": re.compile(r"(?<![\w.])class\b"),
    "typescript": re.compile(r"(?<![\w.])(class|interface|enum|namespace|module)\b"),
}

_GO_TYPE_RE = re.compile(r"^type\s+\w+\s+(struct|interface)\b")
_TEMPLATE_PREFIX_RE = re.compile(r"\btemplate\s*<[^<>]*>")


def _last_toplevel_paren_group(header: str) -> int:
    """Index of the '(' opening the last depth-0 parenthesized group, or -1."""
    depth = 0
    last = -1
    for i, ch in enumerate(header):
        if ch == "(":
            if depth == 0:
                last = i
            depth += 1
        elif ch == ")":
            depth = max(0, depth - 1)
    return last


def _token_before(header: str, pos: int) -> str:
    """The identifier immediately preceding ``header[pos]``, if any."""
    j = pos
    while j > 0 and header[j - 1] in " \t":
        j -= 1
    i = j
    while i > 0 and (header[i - 1].isalnum() or header[i - 1] in "_$"):
        i -= 1
    return header[i:j]


_CLASS_BEFORE_NAME = {
    "java": re.compile(r"(?<![\w.])(class|interface|enum|record)\s+[\w$]+\s*$"),
    "c": re.compile(r"(?<![\w.])(struct|union|enum)\s+\w+\s*$"),
    "cpp": re.compile(r"(?<![\w.])(class|struct|union|enum|namespace)\s+[\w:]+\s*$"),
}


def _strip_comparisons(text: str) -> str:
    """Remove ==, !=, <=, >=, =>, -> so a bare '=' means assignment."""
    return re.sub(r"==|!=|<=|>=|=>|->", " ", text)


def _classify_header(header: str, language: str) -> str:
    """Decide what kind of block a ``{`` opens from the text before it."""
    header = " ".join(header.split())  # collapse whitespace
    if not header:
        return "other"

    if language == "go":
        # Function literals and declarations; `type X struct/interface`.
        if re.search(r"(?<![\w$])func\b", header):
            return FUNCTION
        if _GO_TYPE_RE.match(header):
            return CLASS_LIKE
        return "other"

    if language in ("c", "cpp"):
        header = _TEMPLATE_PREFIX_RE.sub(" ", header).strip()

    if language in ("javascript", "typescript") and header.endswith("=>"):
        return FUNCTION
    if language == "java" and header.endswith("->"):
        return FUNCTION

    control = _CONTROL_KEYWORDS[language]
    if header in control or header.split(" ")[-1] in control:
        return "other"

    paren = _last_toplevel_paren_group(header)
    token = _token_before(header, paren) if paren != -1 else ""
    if token in control:
        return "other"

    if language in ("javascript", "typescript"):
        if re.search(r"(?<![\w.$])function\b", header):
            return FUNCTION
        if _CLASS_KEYWORDS[language].search(header):
            return CLASS_LIKE

    if language == "java" and re.search(r"(?<![\w.])new\b", header):
        # `new Type() {` opens an anonymous class; `new int[] {` an array
        # initializer.
        stripped = _strip_comparisons(header).rstrip()
        return "other" if stripped.endswith("]") else CLASS_LIKE

    if paren != -1 and token and not token[0].isdigit():
        prefix = header[:paren]
        before_name = _CLASS_BEFORE_NAME.get(language)
        if before_name and before_name.search(prefix):
            return CLASS_LIKE  # e.g. `record Point(int x, int y)`
        rparen = header.rfind(")")
        after = header[rparen + 1 :].strip() if rparen > paren else ""
        allowed_suffix = after == "" or after.startswith(
            (":", "->", "throws", "const", "noexcept", "override", "final", "throw")
        )
        if allowed_suffix:
            if "=" in _strip_comparisons(prefix):
                return "other"  # initializer such as `int a[] = ...`
            return FUNCTION

    class_re = _CLASS_KEYWORDS.get(language)
    if class_re and class_re.search(header):
        if "=" in _strip_comparisons(header):
            return "other"
        return CLASS_LIKE
    return "other"


def _scan_braces(text: str, language: str) -> list[SourceUnit]:
    sanitized = _sanitize(text, language)
    units: list[SourceUnit] = []
    stack: list[tuple[str, int]] = []
    header_chars: list[str] = []
    header_start: int | None = None
    line = 1
    paren_depth = 0
    bracket_depth = 0

    for ch in sanitized:
        if ch == "(":
            paren_depth += 1
        elif ch == ")":
            paren_depth = max(0, paren_depth - 1)
        elif ch == "[":
            bracket_depth += 1
        elif ch == "]":
            bracket_depth = max(0, bracket_depth - 1)

        if ch == "{" and paren_depth == 0 and bracket_depth == 0:
            header = "".join(header_chars)
            kind = _classify_header(header, language)
            start = header_start if header.strip() else line
            stack.append((kind, start if start is not None else line))
            header_chars = []
            header_start = None
        elif ch == "}" and paren_depth == 0 and bracket_depth == 0:
            if not stack:
                raise ParseFailed(f"unbalanced '}}' at line {line}")
            kind, start = stack.pop()
            if kind in (FUNCTION, CLASS_LIKE):
                units.append(SourceUnit(kind, start, line))
            header_chars = []
            header_start = None
        elif ch == ";" and paren_depth == 0 and bracket_depth == 0:
            header_chars = []
            header_start = None
        elif (
            ch == ":"
            and paren_depth == 0
            and language in ("c", "cpp")
            and "".join(header_chars).split()
            and "".join(header_chars).split()[-1] in ("public", "private", "protected")
        ):
            # Access-specifier labels are boundaries, not part of the next
            # member's header.
            header_chars = []
            header_start = None
        elif ch == "\n" and language == "go" and paren_depth == 0 and bracket_depth == 0:
            # Go ends statements at newlines and requires `{` on the same
            # line as its declaration, so a depth-0 newline is a boundary.
            header_chars = []
            header_start = None
        elif (
            ch == ","
            and paren_depth == 0
            and bracket_depth == 0
            and (not stack or stack[-1][0] not in (FUNCTION, CLASS_LIKE))
        ):
            # Member separators in object literals and initializers. Inside
            # class bodies a comma can be part of a signature (`throws A, B`),
            # so it only acts as a boundary in plain blocks.
            header_chars = []
            header_start = None
        else:
            if not ch.isspace() and header_start is None:
                header_start = line
            header_chars.append(" " if ch == "\n" else ch)

        if ch == "\n":
            line += 1

    if stack:
        raise ParseFailed(f"unbalanced '{{' left open ({len(stack)} deep) at end of file")
    return units


def scan_units(text: str, language: str) -> list[SourceUnit]:
    """All function and class-like unit spans found in the file."""
    if language == "python":
        return _scan_python(text)
    if language in ("java", "c", "cpp", "javascript", "typescript", "go"):
        return _scan_braces(text, language)
    raise ValueError(f"unsupported language: {language!r}")


def extract_enclosure(file_text: str, language: str, span: tuple[int, int]) -> EnclosingContext:
    """The innermost function containing ``span``; else the innermost
    class-like unit; else the whole module scope.

    ``span`` is (start_line, end_line), 1-based inclusive. Raises
    :class:`SpanOutOfRange` when it does not fit the file and
    :class:`ParseFailed` when the file cannot be scanned.
    """
    if language not in SUPPORTED_LANGUAGES:
        raise ValueError(f"unsupported language: {language!r}")
    lines = file_text.split("\n")
    if lines and lines[-1] == "":
        lines = lines[:-1]
    total = len(lines)
    start, end = span
    if not (1 <= start <= end <= total):
        raise SpanOutOfRange(f"span {span} outside file of {total} lines")

    units = scan_units(file_text, language)
    containing = [u for u in units if u.start_line <= start and end <= u.end_line]

    def innermost(kind: str) -> SourceUnit | None:
        of_kind = [u for u in containing if u.kind == kind]
        if not of_kind:
            return None
        return min(of_kind, key=lambda u: (u.end_line - u.start_line, -u.start_line))

    unit = innermost(FUNCTION)
    kind = FUNCTION
    if unit is None:
        unit = innermost(CLASS_LIKE)
        kind = CLASS_LIKE
    if unit is None:
        unit = SourceUnit(MODULE_SCOPE, 1, total)
        kind = MODULE_SCOPE

    source_text = "\n".join(lines[unit.start_line - 1 : unit.end_line])
    return EnclosingContext(
        unit_kind=kind,
        start_line=unit.start_line,
        end_line=unit.end_line,
        source_text=source_text,
        language=language,
    )
