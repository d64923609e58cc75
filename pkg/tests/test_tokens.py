"""Token counter behavior: fallback segmenter and loaded BPE definitions."""

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from reviewmill.errors import ConfigError
from reviewmill.tokens import (
    count_tokens,
    fallback_counter,
    load_token_counter,
)

FALLBACK = fallback_counter()


class TestFallbackCounter:
    def test_words_and_punctuation(self):
        assert FALLBACK.count("a b c") == 3
        assert FALLBACK.count("foo(bar, baz)") == 6  # foo ( bar , baz )
        assert FALLBACK.count("x += 1") == 4  # x + = 1

    def test_empty_and_whitespace(self):
        assert FALLBACK.count("") == 0
        assert FALLBACK.count(" \t\n  ") == 0

    def test_unicode_identifiers(self):
        assert FALLBACK.count("größe = µ") == 3

    @given(st.text(max_size=80), st.text(max_size=80))
    def test_concatenation_bound(self, a, b):
        joined = count_tokens(FALLBACK, a + b)
        separate = FALLBACK.count(a) + FALLBACK.count(b)
        # Concatenation can only fuse the boundary tokens, never split any.
        assert separate - 1 <= joined <= separate

    @given(st.text(max_size=80), st.text(max_size=80))
    def test_whitespace_join_is_additive(self, a, b):
        assert FALLBACK.count(a + " " + b) == FALLBACK.count(a) + FALLBACK.count(b)


def _byte_symbols(text: str) -> list[str]:
    from reviewmill.tokens import _BYTE_MAP

    return [_BYTE_MAP[b] for b in text.encode("utf-8")]


@pytest.fixture
def tiny_definition(tmp_path):
    """A minimal vocab+merges pair that fuses 'hello' into one token."""
    h, e, l, o = _byte_symbols("helo")
    merges = [
        f"{h} {e}",  # he
        f"{l} {l}",  # ll
        f"{h + e} {l + l}",  # hell
        f"{h + e + l + l} {o}",  # hello
    ]
    vocab = {sym: i for i, sym in enumerate(set("".join(_byte_symbols("hello world")))) }
    directory = tmp_path / "tok"
    directory.mkdir()
    (directory / "vocab.json").write_text(json.dumps(vocab), encoding="utf-8")
    (directory / "merges.txt").write_text(
        "#version: test\n" + "\n".join(merges) + "\n", encoding="utf-8"
    )
    return directory


class TestLoadedCounter:
    def test_merges_apply_greedily(self, tiny_definition):
        counter = load_token_counter(tiny_definition)
        assert counter.count("hello") == 1
        # 'hell' uses the first three merges but not the last.
        assert counter.count("hell") == 1
        # 'help': he + l + p (p never merges)
        assert counter.count("help") == 3

    def test_unknown_text_falls_back_to_bytes(self, tiny_definition):
        counter = load_token_counter(tiny_definition)
        assert counter.count("xyz") == 3  # no merges defined for these bytes

    def test_pretokens_counted_independently(self, tiny_definition):
        counter = load_token_counter(tiny_definition)
        assert counter.count("hello hello") == 2
        assert counter.count("hello(hello)") == counter.count("hello") * 2 + 2

    def test_combined_json_definition(self, tmp_path, tiny_definition):
        vocab = json.loads((tiny_definition / "vocab.json").read_text())
        merges = [
            line
            for line in (tiny_definition / "merges.txt").read_text().splitlines()
            if line and not line.startswith("#")
        ]
        combined = tmp_path / "tokenizer.json"
        combined.write_text(json.dumps({"vocab": vocab, "merges": merges}))
        counter = load_token_counter(combined)
        assert counter.count("hello") == 1

    def test_missing_definition_is_config_error(self, tmp_path):
        with pytest.raises(ConfigError):
            load_token_counter(tmp_path / "nope")

    def test_malformed_merge_line_is_config_error(self, tmp_path):
        directory = tmp_path / "tok"
        directory.mkdir()
        (directory / "vocab.json").write_text("{}")
        (directory / "merges.txt").write_text("a b c\n")
        with pytest.raises(ConfigError):
            load_token_counter(directory)

    def test_unparseable_vocab_is_config_error(self, tmp_path):
        directory = tmp_path / "tok"
        directory.mkdir()
        (directory / "vocab.json").write_text("{not json")
        (directory / "merges.txt").write_text("")
        with pytest.raises(ConfigError):
            load_token_counter(directory)

    def test_determinism(self, tiny_definition):
        a = load_token_counter(tiny_definition)
        b = load_token_counter(tiny_definition)
        text = "hello world; hell or help?"
        assert a.count(text) == b.count(text)
