"""Budget truncation invariants: verbatim hunks, exact margins, idempotence."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reviewmill.enclosure import EnclosingContext
from reviewmill.errors import BudgetTooSmall, EmptyLabel, SpanOutOfRange
from reviewmill.reconstruct import ReconstructedSample
from reviewmill.tokens import fallback_counter
from reviewmill.truncate import (
    TruncatedSample,
    check_hunk_lines_verbatim,
    compute_window,
    truncate_lines,
    truncate_sample,
)

COUNTER = fallback_counter()


def make_lines(n, words_per_line=4):
    return [" ".join(f"w{i}x{j}" for j in range(words_per_line)) for i in range(1, n + 1)]


class TestComputeWindow:
    def test_margins_applied_both_sides(self):
        assert compute_window(100, (50, 52)) == (47, 55)

    def test_clipped_at_start(self):
        assert compute_window(100, (2, 4)) == (1, 7)

    def test_clipped_at_end(self):
        assert compute_window(10, (8, 10)) == (5, 10)

    def test_whole_file_region(self):
        assert compute_window(5, (1, 5)) == (1, 5)

    def test_region_out_of_range(self):
        with pytest.raises(SpanOutOfRange):
            compute_window(10, (5, 11))


class TestTruncateLines:
    def test_under_budget_unchanged(self):
        lines = make_lines(10)
        result = truncate_lines(lines, (4, 5), {4, 5}, COUNTER, budget=10_000)
        assert result.lines == tuple(lines)
        assert not result.truncated
        assert result.origin_offset == 0
        assert result.labels == frozenset({4, 5})

    def test_over_budget_keeps_exact_window(self):
        lines = make_lines(50)  # 4 tokens per line -> 200 tokens total
        result = truncate_lines(lines, (20, 22), {20, 21, 22}, COUNTER, budget=60)
        assert result.truncated
        assert result.origin_offset == 16
        assert result.lines == tuple(lines[16:25])  # lines 17..25
        assert result.region == (4, 6)
        assert result.labels == frozenset({4, 5, 6})

    def test_window_clipped_at_text_edges(self):
        lines = make_lines(20)
        result = truncate_lines(lines, (1, 2), {1}, COUNTER, budget=30)
        assert result.lines == tuple(lines[0:5])  # no lines before line 1
        assert result.origin_offset == 0

    def test_budget_too_small_for_window(self):
        lines = make_lines(30)
        with pytest.raises(BudgetTooSmall):
            truncate_lines(lines, (10, 20), {15}, COUNTER, budget=20)

    def test_zero_budget_rejected(self):
        with pytest.raises(BudgetTooSmall):
            truncate_lines(make_lines(3), (1, 1), {1}, COUNTER, budget=0)

    def test_empty_labels_rejected(self):
        with pytest.raises(EmptyLabel):
            truncate_lines(make_lines(3), (1, 1), set(), COUNTER)

    def test_labels_outside_text_rejected(self):
        with pytest.raises(SpanOutOfRange):
            truncate_lines(make_lines(3), (1, 1), {9}, COUNTER)

    def test_idempotent_when_reapplied(self):
        lines = make_lines(60)
        first = truncate_lines(lines, (30, 31), {30, 31}, COUNTER, budget=50)
        second = truncate_lines(
            list(first.lines), first.region, first.labels, COUNTER, budget=50
        )
        assert second.lines == first.lines
        assert second.region == first.region
        assert second.labels == first.labels
        assert not second.truncated

    @settings(max_examples=200)
    @given(st.data())
    def test_invariants_on_random_inputs(self, data):
        total = data.draw(st.integers(1, 80))
        lines = make_lines(total, words_per_line=data.draw(st.integers(1, 6)))
        start = data.draw(st.integers(1, total))
        end = data.draw(st.integers(start, total))
        labels = set(range(start, end + 1))
        budget = data.draw(st.integers(1, 600))
        try:
            result = truncate_lines(lines, (start, end), labels, COUNTER, budget=budget)
        except BudgetTooSmall:
            window_lo, window_hi = compute_window(total, (start, end))
            window_text = "\n".join(lines[window_lo - 1 : window_hi])
            assert COUNTER.count(window_text) > budget or budget < 1
            return
        off = result.origin_offset
        # Region text survives verbatim.
        assert list(result.lines[result.region[0] - 1 : result.region[1]]) == lines[
            start - 1 : end
        ]
        # Labels map back exactly.
        assert {n + off for n in result.labels} == labels
        if result.truncated:
            assert (off + 1, off + len(result.lines)) == compute_window(
                total, (start, end)
            )
        else:
            assert result.lines == tuple(lines)
        # Idempotence.
        again = truncate_lines(
            list(result.lines), result.region, result.labels, COUNTER, budget=budget
        )
        assert again.lines == result.lines and again.region == result.region


def make_sample(n_lines=40, label_file_lines=(28, 29), start_line=10):
    lines = [f"line{start_line + i}" for i in range(n_lines)]
    lo, hi = label_file_lines
    hunk_text = (
        f"@@ -{lo},2 +{lo},2 @@\n"
        f" line{lo}\n"
        f"-line{hi}\n"
        f"+LINE{hi}"
    )
    context = EnclosingContext(
        unit_kind="function",
        start_line=start_line,
        end_line=start_line + n_lines - 1,
        source_text="\n".join(lines),
        language="python",
    )
    return ReconstructedSample(
        sample_id="s1",
        project="acme/widgets",
        commit_ref="a" * 40,
        file_path="pkg/mod.py",
        language="python",
        comment_text="Watch out for the rename here.",
        hunk_text=hunk_text,
        context=context,
        label_lines=frozenset(range(lo, hi + 1)),
    )


class TestTruncateSample:
    def test_localizes_coordinates(self):
        sample = make_sample()
        out = truncate_sample(sample, COUNTER, budget=10)
        assert out.truncated
        # File lines 28..29 with margin 3 -> window 25..32 -> origin 25.
        assert out.context_origin == 25
        assert out.diff_span == (4, 5)
        assert out.label_lines == frozenset({4, 5})
        assert out.context_text.split("\n")[0] == "line25"
        assert out.token_count == COUNTER.count(out.context_text)

    def test_under_budget_sample_keeps_whole_context(self):
        sample = make_sample()
        out = truncate_sample(sample, COUNTER, budget=10_000)
        assert not out.truncated
        assert out.context_text == sample.context.source_text
        assert out.context_origin == 10
        assert out.diff_span == (19, 20)  # file 28..29 -> local within context
        assert out.label_lines == frozenset({19, 20})

    def test_hunk_lines_verbatim_after_truncation(self):
        out = truncate_sample(make_sample(), COUNTER, budget=10)
        assert check_hunk_lines_verbatim(out)

    def test_provenance_carried(self):
        out = truncate_sample(make_sample(), COUNTER, budget=10)
        assert out.project == "acme/widgets"
        assert out.commit_ref == "a" * 40
        assert out.comment_text == "Watch out for the rename here."
        assert out.hunk_text.startswith("@@ -28,2 +28,2 @@")

    def test_json_round_trip(self):
        out = truncate_sample(make_sample(), COUNTER, budget=10)
        assert TruncatedSample.from_json_dict(out.to_json_dict()) == out
