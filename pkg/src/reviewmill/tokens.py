"""Token counting for the context budget.

Two counters are available: a bundled fallback segmenter (maximal word runs
plus single punctuation marks) and a loader for external tokenizer
definitions in the common vocabulary+merges format (``vocab.json`` +
``merges.txt``, or one JSON file holding both). The fallback guarantees
``count(a) + count(b) - 1 <= count(a+b) <= count(a) + count(b)``; loaded BPE
counters are deterministic but make no concatenation promise.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable

from .errors import ConfigError

FALLBACK_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


@dataclass(frozen=True)
class TokenCounter:
    name: str
    count: Callable[[str], int]


def fallback_counter() -> TokenCounter:
    """The bundled deterministic segmenter: words and single punctuation."""

    def count(text: str) -> int:
        return len(FALLBACK_TOKEN_RE.findall(text))

    return TokenCounter(name="fallback", count=count)


def _bytes_to_unicode() -> dict[int, str]:
    """The standard printable remapping used by byte-level BPE vocabularies."""
    bs = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("\xa1"), ord("\xac") + 1))
        + list(range(ord("\xae"), ord("\xff") + 1))
    )
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, (chr(c) for c in cs)))


_BYTE_MAP = _bytes_to_unicode()


def _read_definition(path: Path) -> tuple[dict[str, int], list[tuple[str, str]]]:
    """Read (vocab, merges) from a directory or a combined JSON file."""
    try:
        if path.is_dir():
            vocab = json.loads((path / "vocab.json").read_text(encoding="utf-8"))
            merge_lines = (path / "merges.txt").read_text(encoding="utf-8").splitlines()
            merges = []
            for line in merge_lines:
                if not line or line.startswith("#"):
                    continue
                parts = line.split(" ")
                if len(parts) != 2:
                    raise ConfigError(f"bad merge line in {path / 'merges.txt'}: {line!r}")
                merges.append((parts[0], parts[1]))
        else:
            blob = json.loads(path.read_text(encoding="utf-8"))
            vocab = blob["vocab"]
            merges = []
            for entry in blob["merges"]:
                parts = entry.split(" ") if isinstance(entry, str) else list(entry)
                if len(parts) != 2:
                    raise ConfigError(f"bad merge entry in {path}: {entry!r}")
                merges.append((parts[0], parts[1]))
    except ConfigError:
        raise
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"unreadable tokenizer definition at {path}: {exc}") from exc
    if not isinstance(vocab, dict):
        raise ConfigError(f"tokenizer vocab at {path} is not a mapping")
    return vocab, merges


def load_token_counter(path: str | Path) -> TokenCounter:
    """Build a byte-level BPE counter from a tokenizer definition on disk.

    Pre-splitting uses the same segmenter as the fallback counter; each
    pre-token is then merged greedily by rank over its byte representation.
    Raises :class:`ConfigError` when the definition cannot be read.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"tokenizer definition not found: {path}")
    _, merges = _read_definition(path)
    ranks = {pair: i for i, pair in enumerate(merges)}

    @lru_cache(maxsize=65536)
    def encode_pretoken(pretoken: str) -> int:
        symbols = [_BYTE_MAP[b] for b in pretoken.encode("utf-8")]
        while len(symbols) >= 2:
            best_rank = None
            best_i = -1
            for i in range(len(symbols) - 1):
                rank = ranks.get((symbols[i], symbols[i + 1]))
                if rank is not None and (best_rank is None or rank < best_rank):
                    best_rank = rank
                    best_i = i
            if best_rank is None:
                break
            symbols[best_i : best_i + 2] = [symbols[best_i] + symbols[best_i + 1]]
        return len(symbols)

    def count(text: str) -> int:
        return sum(encode_pretoken(t) for t in FALLBACK_TOKEN_RE.findall(text))

    return TokenCounter(name=f"bpe:{path.name}", count=count)


def count_tokens(counter: TokenCounter, text: str) -> int:
    """Count tokens with the given counter."""
    return counter.count(text)
