"""Configuration loading and validation."""

import pytest

from reviewmill.config import config_from_dict, load_config
from reviewmill.errors import ConfigError


def write_config(tmp_path, text):
    path = tmp_path / "pipeline.yaml"
    path.write_text(text, encoding="utf-8")
    return path


class TestDefaults:
    def test_empty_dict_gives_documented_defaults(self):
        config = config_from_dict({})
        assert config.thresholds.min_prs == 1000
        assert config.thresholds.min_comments == 50
        assert config.budget.tokens == 1000
        assert config.budget.margin_lines == 3
        assert config.augment.n_variants == 10
        assert config.augment.dedup is False
        assert config.review.steps == (
            "summary",
            "key_code_flows",
            "diff_analyze",
            "issue_check",
        )
        assert config.eval.iou_agg == "macro"
        assert config.eval.skip_failures is False
        assert config.filter.semantic is True
        assert config.concurrency == 4

    def test_empty_yaml_file_gives_defaults(self, tmp_path):
        config = load_config(write_config(tmp_path, ""))
        assert config.workdir == "out"

    def test_window_defaults_parse(self):
        config = config_from_dict({})
        assert config.window.start_at() < config.window.end_at()


class TestLoading:
    def test_full_yaml_round_trip(self, tmp_path):
        path = write_config(
            tmp_path,
            """
            workdir: build
            archives: [a.jsonl.gz, b.jsonl]
            repos:
              acme/widgets: /clones/widgets
            thresholds: {min_prs: 5, min_comments: 2}
            window: {start: "2024-01-01T00:00:00Z", end: "2024-06-01T00:00:00Z"}
            budget: {tokens: 256, margin_lines: 2}
            augment: {n_variants: 4, base_seed: 11, dedup: true}
            endpoint: {base_url: "http://box:9000", model: m1, cassette: tape.jsonl}
            filter: {semantic: false}
            review: {steps: [summary, issue_check], temperature: 0.5}
            judge: {model: j1}
            eval: {iou_agg: micro, skip_failures: true, annotations: raters.csv}
            concurrency: 8
            """,
        )
        config = load_config(path)
        assert config.workdir == "build"
        assert config.archives == ("a.jsonl.gz", "b.jsonl")
        assert config.repos == {"acme/widgets": "/clones/widgets"}
        assert config.thresholds.min_prs == 5
        assert config.budget.tokens == 256
        assert config.augment.n_variants == 4
        assert config.augment.dedup is True
        assert config.endpoint.cassette == "tape.jsonl"
        assert config.filter.semantic is False
        assert config.review.steps == ("summary", "issue_check")
        assert config.judge.model == "j1"
        assert config.eval.iou_agg == "micro"
        assert config.eval.annotations == "raters.csv"
        assert config.concurrency == 8

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.yaml")

    def test_unparseable_yaml(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot parse"):
            load_config(write_config(tmp_path, "a: [1, 2\n"))

    def test_non_mapping_root(self, tmp_path):
        with pytest.raises(ConfigError, match="mapping"):
            load_config(write_config(tmp_path, "- just\n- a list\n"))


class TestRejection:
    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="workdirr"):
            config_from_dict({"workdirr": "x"})

    def test_unknown_nested_key_names_the_section(self):
        with pytest.raises(ConfigError, match="budget.*token_limit"):
            config_from_dict({"budget": {"token_limit": 5}})

    def test_section_must_be_mapping(self):
        with pytest.raises(ConfigError, match="budget"):
            config_from_dict({"budget": 1000})

    def test_archives_must_be_list(self):
        with pytest.raises(ConfigError, match="archives"):
            config_from_dict({"archives": "a.jsonl"})

    def test_repos_must_be_mapping(self):
        with pytest.raises(ConfigError, match="repos"):
            config_from_dict({"repos": ["a"]})

    @pytest.mark.parametrize(
        "blob",
        [
            {"thresholds": {"min_prs": -1}},
            {"budget": {"tokens": 0}},
            {"budget": {"margin_lines": -1}},
            {"augment": {"n_variants": 0}},
            {"concurrency": 0},
            {"eval": {"iou_agg": "median"}},
        ],
    )
    def test_out_of_range_values(self, blob):
        with pytest.raises(ConfigError):
            config_from_dict(blob)

    def test_window_must_be_ordered(self):
        with pytest.raises(ConfigError, match="precede"):
            config_from_dict(
                {
                    "window": {
                        "start": "2024-06-01T00:00:00Z",
                        "end": "2024-01-01T00:00:00Z",
                    }
                }
            )

    def test_window_timestamps_must_parse(self):
        with pytest.raises(ConfigError, match="timestamp"):
            config_from_dict({"window": {"start": "whenever"}})

    def test_unknown_review_step(self):
        with pytest.raises(ConfigError, match="deep_thought"):
            config_from_dict({"review": {"steps": ["deep_thought"]}})

    def test_null_section_keeps_defaults(self):
        config = config_from_dict({"budget": None})
        assert config.budget.tokens == 1000
