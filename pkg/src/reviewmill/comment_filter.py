"""Semantic filtering of review comments.

Two layers: fast bundled rules that catch conversational-glue comments
(acknowledgements, lifecycle notices, bare links, mentions, test-only asks),
and an optional model-based screen for what the rules keep. The rule
categories are applied in a fixed order and the first match wins, so
classification is deterministic. The model screen fails open: if the
endpoint cannot be reached or its verdict cannot be parsed, the comment is
kept rather than silently dropped.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .errors import ConfigError, EndpointError
from .llm import ChatClient, GenConfig, with_retries
from .reconstruct import ReconstructedSample
from .templates import render_template

SEMANTIC_CATEGORY = "SemanticScreen"

KEEP_DROP_RE = re.compile(r"\b(KEEP|DROP)\b")


@dataclass(frozen=True)
class FilterRule:
    """One comment category with the patterns that detect it."""

    name: str
    description: str
    patterns: tuple[re.Pattern, ...]

    def matches(self, text: str) -> bool:
        return any(p.search(text) for p in self.patterns)


def load_rules(path: str | Path | None = None) -> list[FilterRule]:
    """Load filter rules from ``path`` or the bundled default set."""
    try:
        if path is None:
            raw = (
                resources.files("reviewmill")
                .joinpath("data", "rules.json")
                .read_text(encoding="utf-8")
            )
        else:
            raw = Path(path).read_text(encoding="utf-8")
        blob = json.loads(raw)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read filter rules: {exc}") from exc
    categories = blob.get("categories")
    if not isinstance(categories, list) or not categories:
        raise ConfigError("filter rules must define a non-empty 'categories' list")
    rules: list[FilterRule] = []
    seen: set[str] = set()
    for entry in categories:
        try:
            name = entry["name"]
            patterns = entry["patterns"]
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed rule category: {entry!r}") from exc
        if name in seen:
            raise ConfigError(f"duplicate rule category: {name}")
        seen.add(name)
        if not isinstance(patterns, list) or not patterns:
            raise ConfigError(f"category {name} has no patterns")
        compiled = []
        for pattern in patterns:
            try:
                compiled.append(re.compile(pattern, re.IGNORECASE))
            except re.error as exc:
                raise ConfigError(f"bad pattern in category {name}: {exc}") from exc
        rules.append(
            FilterRule(
                name=name,
                description=str(entry.get("description", "")),
                patterns=tuple(compiled),
            )
        )
    return rules


def classify_comment(text: str, rules: Sequence[FilterRule]) -> str | None:
    """First matching category name, or None when the comment is substantive."""
    if not text.strip():
        raise ValueError("cannot classify an empty comment")
    for rule in rules:
        if rule.matches(text):
            return rule.name
    return None


def semantic_screen(
    client: ChatClient,
    template_text: str,
    config: GenConfig,
    attempts: int = 2,
    sleep: Callable[[float], None] | None = None,
) -> Callable[[str], bool]:
    """A keep/drop predicate backed by a completion endpoint.

    Returns True (keep) whenever the endpoint fails after its retry budget or
    answers something other than a clear KEEP/DROP, so outages degrade to the
    rules-only behavior instead of losing data.
    """

    def keep(comment_text: str) -> bool:
        prompt = render_template(template_text, {"comment": comment_text})
        kwargs = {"attempts": attempts}
        if sleep is not None:
            kwargs["sleep"] = sleep
        try:
            output = with_retries(
                lambda: client.complete(prompt, config), **kwargs
            )
        except EndpointError:
            return True
        match = KEEP_DROP_RE.search(output.upper())
        if match is None:
            return True
        return match.group(1) == "KEEP"

    return keep


@dataclass
class FilterOutcome:
    kept: list[ReconstructedSample] = field(default_factory=list)
    dropped: Counter = field(default_factory=Counter)

    @property
    def drop_total(self) -> int:
        return sum(self.dropped.values())


def filter_samples(
    samples: Iterable[ReconstructedSample],
    rules: Sequence[FilterRule],
    screen: Callable[[str], bool] | None = None,
) -> FilterOutcome:
    """Partition samples into kept and per-category drop counts.

    Conservation: ``len(kept) + sum(dropped.values())`` equals the number of
    input samples.
    """
    outcome = FilterOutcome()
    for sample in samples:
        category = classify_comment(sample.comment_text, rules)
        if category is not None:
            outcome.dropped[category] += 1
            continue
        if screen is not None and not screen(sample.comment_text):
            outcome.dropped[SEMANTIC_CATEGORY] += 1
            continue
        outcome.kept.append(sample)
    return outcome
