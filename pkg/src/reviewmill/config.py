"""Pipeline configuration.

A single YAML file drives every stage. Unknown keys anywhere are rejected so
that a typo cannot silently fall back to a default and skew a corpus build.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from datetime import datetime
from pathlib import Path

import yaml

from .errors import ConfigError
from .ingest import parse_timestamp


@dataclass(frozen=True)
class ThresholdsConfig:
    min_prs: int = 1000
    min_comments: int = 50


@dataclass(frozen=True)
class WindowConfig:
    start: str = "2022-01-01T00:00:00Z"
    end: str = "2024-11-01T00:00:00Z"

    def start_at(self) -> datetime:
        return parse_timestamp(self.start)

    def end_at(self) -> datetime:
        return parse_timestamp(self.end)


@dataclass(frozen=True)
class BudgetConfig:
    tokens: int = 1000
    margin_lines: int = 3
    tokenizer: str | None = None  # path to a vocab+merges definition


@dataclass(frozen=True)
class AugmentConfig:
    n_variants: int = 10
    base_seed: int = 0
    max_attempts: int | None = None
    dedup: bool = False
    temperature: float = 0.9
    top_p: float = 0.95


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str = "http://localhost:8000"
    model: str = "review-model"
    max_tokens: int = 2048
    cassette: str | None = None  # replay recorded responses from this file
    record: str | None = None  # append live responses to this file


@dataclass(frozen=True)
class FilterConfig:
    rules: str | None = None  # custom rules file; None = bundled set
    semantic: bool = True  # apply the model screen after the rules


@dataclass(frozen=True)
class ReviewConfig:
    steps: tuple[str, ...] = (
        "summary",
        "key_code_flows",
        "diff_analyze",
        "issue_check",
    )
    temperature: float = 0.2
    seed: int = 0


@dataclass(frozen=True)
class JudgeConfig:
    model: str = "judge-model"
    temperature: float = 0.0


@dataclass(frozen=True)
class EvalConfig:
    iou_agg: str = "macro"
    skip_failures: bool = False
    annotations: str | None = None  # human-annotation CSV


@dataclass(frozen=True)
class PipelineConfig:
    workdir: str = "out"
    archives: tuple[str, ...] = ()
    repos: dict = field(default_factory=dict)  # project -> local clone path
    thresholds: ThresholdsConfig = field(default_factory=ThresholdsConfig)
    window: WindowConfig = field(default_factory=WindowConfig)
    budget: BudgetConfig = field(default_factory=BudgetConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    endpoint: EndpointConfig = field(default_factory=EndpointConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    review: ReviewConfig = field(default_factory=ReviewConfig)
    judge: JudgeConfig = field(default_factory=JudgeConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    concurrency: int = 4


_SECTION_TYPES = {
    "thresholds": ThresholdsConfig,
    "window": WindowConfig,
    "budget": BudgetConfig,
    "augment": AugmentConfig,
    "endpoint": EndpointConfig,
    "filter": FilterConfig,
    "review": ReviewConfig,
    "judge": JudgeConfig,
    "eval": EvalConfig,
}


def _build_section(cls, blob: dict, where: str):
    allowed = {f.name for f in fields(cls)}
    unknown = set(blob) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    kwargs = {}
    for f in fields(cls):
        if f.name not in blob:
            continue
        value = blob[f.name]
        if f.name == "steps" and isinstance(value, list):
            value = tuple(str(v) for v in value)
        kwargs[f.name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad value in {where}: {exc}") from exc


def config_from_dict(blob: dict) -> PipelineConfig:
    if not isinstance(blob, dict):
        raise ConfigError("configuration root must be a mapping")
    allowed = {f.name for f in fields(PipelineConfig)}
    unknown = set(blob) - allowed
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    kwargs: dict = {}
    for key, value in blob.items():
        if key in _SECTION_TYPES:
            if value is None:
                continue
            if not isinstance(value, dict):
                raise ConfigError(f"section {key} must be a mapping")
            kwargs[key] = _build_section(_SECTION_TYPES[key], value, key)
        elif key == "archives":
            if not isinstance(value, list):
                raise ConfigError("archives must be a list of paths")
            kwargs[key] = tuple(str(v) for v in value)
        elif key == "repos":
            if not isinstance(value, dict):
                raise ConfigError("repos must map project names to clone paths")
            kwargs[key] = {str(k): str(v) for k, v in value.items()}
        else:
            kwargs[key] = value
    config = PipelineConfig(**kwargs)
    _validate(config)
    return config


def _validate(config: PipelineConfig) -> None:
    if config.thresholds.min_prs < 0 or config.thresholds.min_comments < 0:
        raise ConfigError("thresholds must be >= 0")
    if config.budget.tokens < 1:
        raise ConfigError("budget.tokens must be >= 1")
    if config.budget.margin_lines < 0:
        raise ConfigError("budget.margin_lines must be >= 0")
    if config.augment.n_variants < 1:
        raise ConfigError("augment.n_variants must be >= 1")
    if config.concurrency < 1:
        raise ConfigError("concurrency must be >= 1")
    if config.eval.iou_agg not in ("macro", "micro"):
        raise ConfigError("eval.iou_agg must be 'macro' or 'micro'")
    try:
        start, end = config.window.start_at(), config.window.end_at()
    except ValueError as exc:
        raise ConfigError(f"bad window timestamp: {exc}") from exc
    if start >= end:
        raise ConfigError("window.start must precede window.end")
    from .review import normalize_steps

    try:
        normalize_steps(config.review.steps)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> PipelineConfig:
    """Read a YAML configuration file into a validated PipelineConfig."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        blob = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    if blob is None:
        blob = {}
    return config_from_dict(blob)
