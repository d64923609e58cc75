"""Archive ingestion: event parsing, project stats, fix-commit linking."""

import gzip
import json
from datetime import datetime, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

from reviewmill.ingest import (
    EventParseResult,
    FixLink,
    ProjectStats,
    ProjectStatsAccumulator,
    ReviewEvent,
    commented_new_span,
    filter_projects,
    iter_archive_lines,
    link_fix_commits,
    parse_event_stream,
    parse_timestamp,
)

DIFF_FRAGMENT = (
    "@@ -10,4 +12,5 @@ def handler():\n"
    "     a = 1\n"
    "-    b = compute()\n"
    "+    b = compute_fast()\n"
    "+    log(b)\n"
    "     return b"
)


def review_comment_record(
    *,
    event_id="100",
    project="acme/widgets",
    pr_number=7,
    comment_id="900",
    body="This can raise on empty input.",
    diff_hunk=DIFF_FRAGMENT,
    path="src/service.py",
    created_at="2023-05-04T10:00:00Z",
    commit="a" * 40,
):
    return {
        "id": event_id,
        "type": "PullRequestReviewCommentEvent",
        "created_at": created_at,
        "repo": {"name": project},
        "payload": {
            "pull_request": {"number": pr_number},
            "comment": {
                "id": comment_id,
                "body": body,
                "path": path,
                "diff_hunk": diff_hunk,
                "original_commit_id": commit,
            },
        },
    }


def pr_event_record(project="acme/widgets", number=1):
    return {
        "id": "55",
        "type": "PullRequestEvent",
        "created_at": "2023-05-04T10:00:00Z",
        "repo": {"name": project},
        "payload": {"action": "opened", "pull_request": {"number": number}},
    }


class TestTimestamp:
    def test_zulu_suffix(self):
        dt = parse_timestamp("2023-05-04T10:00:00Z")
        assert dt == datetime(2023, 5, 4, 10, 0, 0, tzinfo=timezone.utc)

    def test_offset_normalized_to_utc(self):
        dt = parse_timestamp("2023-05-04T12:30:00+02:30")
        assert dt == datetime(2023, 5, 4, 10, 0, 0, tzinfo=timezone.utc)

    def test_naive_assumed_utc(self):
        dt = parse_timestamp("2023-05-04T10:00:00")
        assert dt.tzinfo == timezone.utc


class TestParseEventStream:
    def test_extracts_review_events(self):
        lines = [json.dumps(review_comment_record())]
        result = parse_event_stream(lines)
        assert result.total == 1
        assert result.well_formed == 1
        assert result.skipped == 0
        [event] = result.events
        assert event.project == "acme/widgets"
        assert event.pr_number == 7
        assert event.comment_id == "900"
        assert event.diff_fragment == DIFF_FRAGMENT
        assert event.commit_ref == "a" * 40

    def test_other_event_types_are_well_formed_but_not_kept(self):
        result = parse_event_stream([json.dumps(pr_event_record())])
        assert result.well_formed == 1
        assert result.events == []

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda r: r["payload"]["comment"].pop("diff_hunk"),
            lambda r: r["payload"]["comment"].__setitem__("diff_hunk", ""),
            lambda r: r["payload"]["comment"].__setitem__("body", "   "),
            lambda r: r["payload"]["comment"].__setitem__("original_commit_id", "xyz"),
            lambda r: r["payload"]["comment"].__setitem__("original_commit_id", "ABCDEF1"),
            lambda r: r["payload"].__setitem__("pull_request", {}),
            lambda r: r.__setitem__("created_at", "yesterday"),
            lambda r: r["payload"]["comment"].__setitem__("path", ""),
        ],
    )
    def test_invalid_review_comments_are_skipped(self, mutate):
        record = review_comment_record()
        mutate(record)
        result = parse_event_stream([json.dumps(record)])
        assert result.events == []
        assert result.skipped == 1
        assert result.skip_reasons["invalid-review-comment"] == 1

    def test_bad_json_and_blanks_are_skipped_not_fatal(self):
        lines = [
            "{broken",
            "",
            '"just a string"',
            json.dumps(review_comment_record()),
        ]
        result = parse_event_stream(lines)
        assert result.total == 4
        assert result.well_formed == 1
        assert result.skipped == 3
        assert len(result.events) == 1

    def test_conservation_well_formed_plus_skipped_equals_total(self):
        lines = [
            json.dumps(review_comment_record(comment_id=str(i))) for i in range(5)
        ] + ["oops", json.dumps(pr_event_record()), ""]
        result = parse_event_stream(lines)
        assert result.conserved()
        assert result.total == 8

    @given(
        st.lists(
            st.one_of(
                st.just("valid-review"),
                st.just("valid-pr"),
                st.just("garbage"),
                st.just(""),
            ),
            max_size=30,
        )
    )
    def test_conservation_holds_for_any_mix(self, kinds):
        lines = []
        for i, kind in enumerate(kinds):
            if kind == "valid-review":
                lines.append(json.dumps(review_comment_record(comment_id=str(i))))
            elif kind == "valid-pr":
                lines.append(json.dumps(pr_event_record(number=i + 1)))
            elif kind == "garbage":
                lines.append("}{not json")
            else:
                lines.append("")
        result = parse_event_stream(lines)
        assert result.conserved()
        assert result.total == len(kinds)

    def test_event_json_round_trip(self):
        result = parse_event_stream([json.dumps(review_comment_record())])
        [event] = result.events
        assert ReviewEvent.from_json_dict(event.to_json_dict()) == event


class TestProjectStats:
    def test_counts_prs_distinctly_and_comments_cumulatively(self):
        stats = ProjectStatsAccumulator()
        lines = [
            json.dumps(review_comment_record(pr_number=1, comment_id="1")),
            json.dumps(review_comment_record(pr_number=1, comment_id="2")),
            json.dumps(review_comment_record(pr_number=2, comment_id="3")),
            json.dumps(pr_event_record(number=3)),
            json.dumps(pr_event_record(number=3)),  # duplicate PR event
        ]
        parse_event_stream(lines, stats=stats)
        [snap] = stats.snapshot()
        assert snap == ProjectStats(
            project="acme/widgets", pr_count=3, review_comment_count=3
        )

    def test_merge_is_commutative(self):
        a = ProjectStatsAccumulator()
        b = ProjectStatsAccumulator()
        parse_event_stream(
            [json.dumps(review_comment_record(pr_number=n)) for n in (1, 2)], stats=a
        )
        parse_event_stream(
            [
                json.dumps(review_comment_record(pr_number=2)),
                json.dumps(pr_event_record(project="other/repo", number=9)),
            ],
            stats=b,
        )
        assert a.merge(b).snapshot() == b.merge(a).snapshot()

    @given(
        st.lists(
            st.tuples(st.sampled_from(["p/a", "p/b", "p/c"]), st.integers(1, 5)),
            max_size=40,
        ),
        st.data(),
    )
    def test_sharded_accumulation_matches_sequential(self, items, data):
        cut = data.draw(st.integers(0, len(items)))
        sequential = ProjectStatsAccumulator()
        left = ProjectStatsAccumulator()
        right = ProjectStatsAccumulator()
        for i, (project, pr) in enumerate(items):
            sequential.add_pr(project, pr)
            sequential.add_comment(project)
            target = left if i < cut else right
            target.add_pr(project, pr)
            target.add_comment(project)
        assert left.merge(right).snapshot() == sequential.snapshot()

    def test_filter_projects_thresholds(self):
        stats = [
            ProjectStats("big/active", 1200, 80),
            ProjectStats("big/quiet", 1200, 49),
            ProjectStats("small/chatty", 999, 500),
            ProjectStats("edge/exact", 1000, 50),
        ]
        assert filter_projects(stats) == {"big/active", "edge/exact"}
        assert filter_projects(stats, min_prs=1, min_comments=1) == {
            s.project for s in stats
        }

    def test_filter_projects_rejects_negative_thresholds(self):
        with pytest.raises(ValueError):
            filter_projects([], min_prs=-1)


class TestArchives:
    def test_reads_plain_and_gzip(self, tmp_path):
        plain = tmp_path / "a.jsonl"
        plain.write_text("one\ntwo\n", encoding="utf-8")
        zipped = tmp_path / "b.jsonl.gz"
        with gzip.open(zipped, "wt", encoding="utf-8") as fh:
            fh.write("three\n")
        lines = list(iter_archive_lines([plain, zipped]))
        assert [ln.strip() for ln in lines] == ["one", "two", "three"]


class TestFixLinking:
    def event(self):
        result = parse_event_stream([json.dumps(review_comment_record())])
        return result.events[0]

    def test_new_span_of_commented_fragment(self):
        # New side starts at 12; the clipped body shows 4 new-side lines.
        assert commented_new_span(self.event()) == {12, 13, 14, 15}

    def test_earliest_overlapping_commit_wins(self):
        event = self.event()
        later = [
            ("c1", {"other/file.py": {12, 13}}),  # wrong file
            ("c2", {"src/service.py": {99}}),  # no overlap
            ("c3", {"src/service.py": {13, 14, 99}}),  # first overlap
            ("c4", {"src/service.py": {12}}),  # later overlap, ignored
        ]
        link = link_fix_commits(event, later)
        assert link == FixLink(
            comment_id="900", fix_commit="c3", overlap_lines=frozenset({13, 14})
        )

    def test_no_overlap_returns_none(self):
        assert link_fix_commits(self.event(), [("c1", {"src/service.py": {1}})]) is None
        assert link_fix_commits(self.event(), []) is None

    def test_pure_insertion_fragment_still_links(self):
        record = review_comment_record(
            diff_hunk="@@ -5,0 +6,2 @@\n+added_a()\n+added_b()"
        )
        [event] = parse_event_stream([json.dumps(record)]).events
        span = commented_new_span(event)
        assert span == {6, 7}
        link = link_fix_commits(event, [("fix", {"src/service.py": {7}})])
        assert link is not None and link.fix_commit == "fix"
