"""Prompt templates.

Two formats are supported:

* Plain templates carry ``{name}`` placeholders. Rendering validates both
  directions — every placeholder must receive a value and every provided
  value must be consumed — so a typo in either place fails loudly instead of
  silently emitting a half-filled prompt. Braces that do not form a
  ``{lower_snake_case}`` placeholder pass through untouched, which keeps
  code samples inside templates safe.

* Sectioned templates are split by ``[[section]]`` marker lines into named
  blocks (used to compose prompts whose reasoning steps can be toggled).
"""

from __future__ import annotations

import re
from importlib import resources
from pathlib import Path
from typing import Mapping

from .errors import TemplateError

PLACEHOLDER_RE = re.compile(r"\{([a-z][a-z0-9_]*)\}")
SECTION_RE = re.compile(r"^\[\[([a-z][a-z0-9_:]*)\]\][ \t]*$", re.MULTILINE)


def placeholders(template_text: str) -> set[str]:
    """Names of all ``{placeholder}`` slots in the template."""
    return set(PLACEHOLDER_RE.findall(template_text))


def render_template(template_text: str, variables: Mapping[str, str]) -> str:
    """Fill every placeholder, rejecting missing and unused variables."""
    slots = placeholders(template_text)
    missing = slots - set(variables)
    if missing:
        raise TemplateError(f"template is missing values for: {sorted(missing)}")
    unused = set(variables) - slots
    if unused:
        raise TemplateError(f"variables not used by template: {sorted(unused)}")
    bad_types = [k for k, v in variables.items() if not isinstance(v, str)]
    if bad_types:
        raise TemplateError(f"template variables must be strings: {sorted(bad_types)}")

    def replace(match: re.Match) -> str:
        return variables[match.group(1)]

    return PLACEHOLDER_RE.sub(replace, template_text)


def parse_sections(template_text: str) -> dict[str, str]:
    """Split a sectioned template into ``{name: content}``.

    Content outside any section must be blank; duplicate section names are
    rejected. Each block's content is stripped of leading/trailing blank
    lines but kept verbatim inside.
    """
    sections: dict[str, str] = {}
    matches = list(SECTION_RE.finditer(template_text))
    if not matches:
        raise TemplateError("sectioned template has no [[section]] markers")
    head = template_text[: matches[0].start()]
    if head.strip():
        raise TemplateError("unexpected content before the first [[section]] marker")
    for i, match in enumerate(matches):
        name = match.group(1)
        if name in sections:
            raise TemplateError(f"duplicate section [[{name}]]")
        end = matches[i + 1].start() if i + 1 < len(matches) else len(template_text)
        sections[name] = template_text[match.end() : end].strip("\n")
    return sections


def load_bundled(name: str) -> str:
    """Text of a template bundled with the package (``data/templates/``)."""
    ref = resources.files("reviewmill").joinpath("data", "templates", name)
    try:
        return ref.read_text(encoding="utf-8")
    except (FileNotFoundError, OSError) as exc:
        raise TemplateError(f"bundled template not found: {name}") from exc


def load_template(path_or_name: str | Path) -> str:
    """Text of a template from an explicit path, else from the bundle."""
    path = Path(path_or_name)
    if path.exists():
        return path.read_text(encoding="utf-8")
    if path.parent == Path("."):
        return load_bundled(path.name)
    raise TemplateError(f"template not found: {path_or_name}")
