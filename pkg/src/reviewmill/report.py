"""Evaluation aggregation and report rendering.

Review records are scored on two axes: line-set overlap between the labeled
and predicted lines, and a judged hit rate on the comments. Failed records
count as misses by default (a system that cannot produce a usable review for
a sample did not review it); ``skip_failures`` excludes them from the
denominators instead, and the report always carries the counts needed to
check that no record silently vanished.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .metrics import HitVerdict, hit_rate, iou
from .review import ReviewRecord

IOU_AGGREGATIONS = ("macro", "micro")


@dataclass(frozen=True)
class EvalReport:
    """Aggregated scores for one step configuration."""

    config: str
    n_input: int
    n_failed: int
    n_scored: int
    iou_agg: str
    iou_pct: float
    hit_rate: float
    judge_parse_failures: int
    human_hit_pct: float | None = None
    human_valuable_pct: float | None = None
    kappa: float | None = None
    kappa_raters: tuple[str, str] | None = None

    def to_json_dict(self) -> dict:
        return {
            "config": self.config,
            "n_input": self.n_input,
            "n_failed": self.n_failed,
            "n_scored": self.n_scored,
            "iou_agg": self.iou_agg,
            "iou_pct": self.iou_pct,
            "hit_rate": self.hit_rate,
            "judge_parse_failures": self.judge_parse_failures,
            "human_hit_pct": self.human_hit_pct,
            "human_valuable_pct": self.human_valuable_pct,
            "kappa": self.kappa,
            "kappa_raters": list(self.kappa_raters) if self.kappa_raters else None,
        }


def aggregate_report(
    records: Sequence[ReviewRecord],
    verdicts: Mapping[str, HitVerdict],
    config_name: str = "full",
    iou_agg: str = "macro",
    skip_failures: bool = False,
) -> EvalReport:
    """Score one configuration's records.

    ``verdicts`` maps sample ids to judged comment verdicts (absent for
    failed records). Conservation invariant:
    ``n_scored + (n_failed if skip_failures else 0) == n_input``.
    """
    if iou_agg not in IOU_AGGREGATIONS:
        raise ValueError(f"iou_agg must be one of {IOU_AGGREGATIONS}")
    records = list(records)
    n_input = len(records)
    failed = [r for r in records if r.failed]
    scored = [r for r in records if not r.failed]
    if not skip_failures:
        scored = records
    if not scored:
        raise ValueError("no records to score")

    per_sample: list[Fraction] = []
    inter_total = 0
    union_total = 0
    verdict_list: list[HitVerdict] = []
    judge_parse_failures = 0
    for record in scored:
        if record.failed or record.predicted_lines is None:
            value = Fraction(0)
            inter_total += 0
            union_total += len(record.label_lines)
        else:
            value = iou(record.label_lines, record.predicted_lines)
            inter_total += len(record.label_lines & record.predicted_lines)
            union_total += len(record.label_lines | record.predicted_lines)
        per_sample.append(value)
        verdict = verdicts.get(record.sample_id)
        if verdict is None:
            verdict = HitVerdict(
                sample_id=record.sample_id,
                hit=False,
                judge_raw="<no verdict: generation failed>",
                parse_failed=True,
            )
        if verdict.parse_failed:
            judge_parse_failures += 1
        verdict_list.append(verdict)

    if iou_agg == "macro":
        iou_value = sum(per_sample, Fraction(0)) / len(per_sample)
    else:
        iou_value = Fraction(inter_total, union_total) if union_total else Fraction(0)

    return EvalReport(
        config=config_name,
        n_input=n_input,
        n_failed=len(failed),
        n_scored=len(scored),
        iou_agg=iou_agg,
        iou_pct=float(iou_value * 100),
        hit_rate=hit_rate(verdict_list),
        judge_parse_failures=judge_parse_failures,
    )


def ratio_vs_full(full_value: float, value: float) -> float:
    """Relative change of ``value`` against the full configuration, in percent."""
    if full_value == 0:
        raise ValueError("cannot compute a ratio against a zero baseline")
    return (value - full_value) / full_value * 100


def format_ratio(value: float) -> str:
    return f"{value:.2f}%"


def render_scores_markdown(reports: Sequence[EvalReport]) -> str:
    """Render per-configuration scores as a markdown table."""
    lines = [
        "| Steps | IoU (%) | Hit Rate (%) | Scored | Failed |",
        "| --- | --- | --- | --- | --- |",
    ]
    for r in reports:
        lines.append(
            f"| {r.config} | {r.iou_pct:.2f} | {r.hit_rate:.2f} "
            f"| {r.n_scored} | {r.n_failed} |"
        )
    return "\n".join(lines) + "\n"


def render_ablation_markdown(reports: Sequence[EvalReport]) -> str:
    """Render the step-ablation grid with an IoU ratio column vs ``full``."""
    by_config = {r.config: r for r in reports}
    if "full" not in by_config:
        raise ValueError("ablation table needs a 'full' configuration")
    full = by_config["full"]
    lines = [
        "| Steps | IoU (%) | Hit Rate (%) | IoU ratio vs full |",
        "| --- | --- | --- | --- |",
    ]
    for r in reports:
        if r.config == "full":
            ratio = "—"
        else:
            ratio = format_ratio(ratio_vs_full(full.iou_pct, r.iou_pct))
        lines.append(
            f"| {r.config} | {r.iou_pct:.2f} | {r.hit_rate:.2f} | {ratio} |"
        )
    return "\n".join(lines) + "\n"


def write_report_jsonl(reports: Iterable[EvalReport], path: str | Path) -> None:
    """One JSON line per configuration, with the ratio column materialized."""
    reports = list(reports)
    full = next((r for r in reports if r.config == "full"), None)
    with open(path, "w", encoding="utf-8") as fh:
        for r in reports:
            blob = r.to_json_dict()
            if full is not None and r.config != "full" and full.iou_pct != 0:
                blob["iou_ratio_vs_full_pct"] = ratio_vs_full(full.iou_pct, r.iou_pct)
            else:
                blob["iou_ratio_vs_full_pct"] = None
            fh.write(json.dumps(blob, ensure_ascii=False, sort_keys=True) + "\n")
