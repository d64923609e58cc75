"""Score aggregation, ratio arithmetic, and report rendering."""

import json
from fractions import Fraction
from pathlib import Path

import pytest

from reviewmill.metrics import HitVerdict
from reviewmill.report import (
    EvalReport,
    aggregate_report,
    format_ratio,
    ratio_vs_full,
    render_ablation_markdown,
    render_scores_markdown,
    write_report_jsonl,
)
from reviewmill.review import ReviewRecord

GOLDEN = Path(__file__).parent / "fixtures" / "report" / "ablation.md"


def record(sample_id, label, predicted=None, failed=False):
    return ReviewRecord(
        sample_id=sample_id,
        steps=("summary",),
        label_lines=frozenset(label),
        reference_comment="ref",
        raw_output="" if failed else "LINES: 1\nCOMMENT: c",
        predicted_lines=frozenset(predicted) if predicted is not None else None,
        predicted_comment=None if failed else "c",
        failed=failed,
        failure="endpoint: down" if failed else "",
    )


RECORDS = [
    record("a", {1, 2, 3}, {2, 3, 4, 5}),
    record("b", {10}, {10}),
    record("c", {7, 8}, failed=True),
]
VERDICTS = {
    "a": HitVerdict(sample_id="a", hit=True),
    "b": HitVerdict(sample_id="b", hit=False),
}


class TestAggregateReport:
    def test_macro_with_failures_as_misses(self):
        report = aggregate_report(RECORDS, VERDICTS, config_name="full")
        # (2/5 + 1 + 0) / 3 = 7/15
        assert report.iou_pct == pytest.approx(float(Fraction(7, 15) * 100))
        assert report.hit_rate == pytest.approx(100 / 3)
        assert report.n_input == 3
        assert report.n_failed == 1
        assert report.n_scored == 3
        assert report.judge_parse_failures == 1  # the failed record's stand-in

    def test_micro_aggregation(self):
        report = aggregate_report(RECORDS, VERDICTS, iou_agg="micro")
        # intersections 2+1+0 = 3, unions 5+1+2 = 8
        assert report.iou_pct == pytest.approx(37.5)

    def test_skip_failures_changes_denominators(self):
        report = aggregate_report(RECORDS, VERDICTS, skip_failures=True)
        assert report.n_scored == 2
        assert report.iou_pct == pytest.approx(70.0)  # (2/5 + 1) / 2
        assert report.hit_rate == pytest.approx(50.0)
        assert report.judge_parse_failures == 0

    def test_conservation_invariant(self):
        for skip in (False, True):
            report = aggregate_report(RECORDS, VERDICTS, skip_failures=skip)
            excluded = report.n_failed if skip else 0
            assert report.n_scored + excluded == report.n_input

    def test_unjudged_success_counts_as_flagged_miss(self):
        report = aggregate_report(RECORDS[:2], {"a": VERDICTS["a"]})
        assert report.hit_rate == pytest.approx(50.0)
        assert report.judge_parse_failures == 1

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            aggregate_report([], {})

    def test_unknown_aggregation_rejected(self):
        with pytest.raises(ValueError):
            aggregate_report(RECORDS, VERDICTS, iou_agg="harmonic")


class TestRatio:
    def test_reference_ratio_value(self):
        # Dropping a step that moves overlap from 27.16 to 25.38 is a 6.55% loss.
        assert ratio_vs_full(27.16, 25.38) == pytest.approx(-6.5537554, abs=1e-6)
        assert format_ratio(ratio_vs_full(27.16, 25.38)) == "-6.55%"

    def test_zero_baseline_rejected(self):
        with pytest.raises(ValueError):
            ratio_vs_full(0.0, 5.0)

    def test_positive_ratio_formatting(self):
        assert format_ratio(ratio_vs_full(20.0, 21.0)) == "5.00%"


def report_for(config, iou_pct, hit):
    return EvalReport(
        config=config,
        n_input=100,
        n_failed=0,
        n_scored=100,
        iou_agg="macro",
        iou_pct=iou_pct,
        hit_rate=hit,
        judge_parse_failures=0,
    )


class TestRendering:
    def test_ablation_table_matches_golden_file(self):
        reports = [
            report_for("full", 27.16, 25.40),
            report_for("no_summary", 25.38, 24.80),
        ]
        assert render_ablation_markdown(reports) == GOLDEN.read_text(encoding="utf-8")

    def test_ablation_requires_full_row(self):
        with pytest.raises(ValueError):
            render_ablation_markdown([report_for("no_summary", 25.38, 24.80)])

    def test_scores_table_shape(self):
        text = render_scores_markdown([report_for("full", 27.16, 25.40)])
        assert "| full | 27.16 | 25.40 | 100 | 0 |" in text

    def test_report_jsonl_with_ratio_column(self, tmp_path):
        reports = [
            report_for("full", 27.16, 25.40),
            report_for("no_summary", 25.38, 24.80),
        ]
        path = tmp_path / "report.jsonl"
        write_report_jsonl(reports, path)
        rows = [json.loads(line) for line in path.read_text().splitlines()]
        assert rows[0]["config"] == "full"
        assert rows[0]["iou_ratio_vs_full_pct"] is None
        assert rows[1]["iou_ratio_vs_full_pct"] == pytest.approx(-6.5537554, abs=1e-6)

    def test_report_jsonl_is_deterministic(self, tmp_path):
        reports = [report_for("full", 27.16, 25.40)]
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_report_jsonl(reports, p1)
        write_report_jsonl(reports, p2)
        assert p1.read_bytes() == p2.read_bytes()
