"""Completion-endpoint access: live HTTP, recording, and replay.

Every request is identified by a digest of its full parameter set, so a
recorded session (a "cassette") can replay responses deterministically —
including scripted transient failures — without any network access.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Protocol, Sequence, TypeVar

import httpx

from .errors import EndpointError

T = TypeVar("T")
R = TypeVar("R")

API_KEY_ENV = "REVIEWMILL_API_KEY"


@dataclass(frozen=True)
class GenConfig:
    """Sampling parameters for one completion request."""

    model: str = "review-model"
    temperature: float = 0.0
    top_p: float = 1.0
    max_tokens: int = 2048
    seed: int | None = None

    def with_seed(self, seed: int) -> "GenConfig":
        return replace(self, seed=seed)


class ChatClient(Protocol):
    def complete(self, prompt: str, config: GenConfig) -> str:
        """Return the completion text for ``prompt`` under ``config``."""
        ...


def request_key(prompt: str, config: GenConfig) -> str:
    """Stable digest identifying a request; replay lookups key on this."""
    canonical = json.dumps(
        {
            "model": config.model,
            "prompt": prompt,
            "temperature": config.temperature,
            "top_p": config.top_p,
            "max_tokens": config.max_tokens,
            "seed": config.seed,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


_TRANSIENT_STATUS = {408, 425, 429, 500, 502, 503, 504}


class HttpChatClient:
    """OpenAI-style ``/v1/chat/completions`` client."""

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        timeout: float = 60.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def complete(self, prompt: str, config: GenConfig) -> str:
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body: dict[str, Any] = {
            "model": config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": config.temperature,
            "top_p": config.top_p,
            "max_tokens": config.max_tokens,
        }
        if config.seed is not None:
            body["seed"] = config.seed
        try:
            response = self._client.post(
                f"{self.base_url}/v1/chat/completions", json=body, headers=headers
            )
        except httpx.HTTPError as exc:
            raise EndpointError(f"transport failure: {exc}", transient=True) from exc
        if response.status_code != 200:
            raise EndpointError(
                f"endpoint returned HTTP {response.status_code}",
                transient=response.status_code in _TRANSIENT_STATUS,
            )
        try:
            content = response.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise EndpointError(f"malformed completion payload: {exc}") from exc
        if not isinstance(content, str):
            raise EndpointError("completion content is not text")
        return content

    def close(self) -> None:
        self._client.close()


class CassetteClient:
    """Replays recorded completions from a JSONL cassette.

    Each line is ``{"key": <digest>, "response": <text>}`` or
    ``{"key": <digest>, "error": <message>, "transient": <bool>}``. Repeated
    keys form a queue consumed in file order; once a queue is exhausted its
    last record repeats, so retry sequences replay deterministically. A
    request whose key was never recorded raises a non-transient
    :class:`EndpointError`.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._queues: dict[str, list[dict]] = {}
        self._cursors: dict[str, int] = {}
        self._lock = threading.Lock()
        if not self.path.exists():
            raise EndpointError(f"cassette not found: {self.path}")
        with open(self.path, encoding="utf-8") as fh:
            for n, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                    key = record["key"]
                except (ValueError, KeyError, TypeError) as exc:
                    raise EndpointError(
                        f"bad cassette record at {self.path}:{n}: {exc}"
                    ) from exc
                self._queues.setdefault(key, []).append(record)

    def complete(self, prompt: str, config: GenConfig) -> str:
        key = request_key(prompt, config)
        with self._lock:
            queue = self._queues.get(key)
            if not queue:
                raise EndpointError(
                    f"cassette has no recording for request {key[:12]}…"
                )
            cursor = self._cursors.get(key, 0)
            record = queue[min(cursor, len(queue) - 1)]
            self._cursors[key] = cursor + 1
        if "error" in record:
            raise EndpointError(
                str(record["error"]), transient=bool(record.get("transient"))
            )
        return record["response"]


class RecordingClient:
    """Wraps a live client and appends every exchange to a cassette file."""

    def __init__(self, inner: ChatClient, path: str | Path):
        self.inner = inner
        self.path = Path(path)
        self._lock = threading.Lock()

    def complete(self, prompt: str, config: GenConfig) -> str:
        key = request_key(prompt, config)
        try:
            response = self.inner.complete(prompt, config)
        except EndpointError as exc:
            self._append({"key": key, "error": str(exc), "transient": exc.transient})
            raise
        self._append({"key": key, "response": response})
        return response

    def _append(self, record: dict) -> None:
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def with_retries(
    fn: Callable[[], T],
    attempts: int = 3,
    base_delay: float = 0.5,
    sleep: Callable[[float], None] = time.sleep,
) -> T:
    """Run ``fn``, retrying transient endpoint failures with backoff."""
    if attempts < 1:
        raise ValueError("attempts must be >= 1")
    for attempt in range(attempts):
        try:
            return fn()
        except EndpointError as exc:
            if not exc.transient or attempt == attempts - 1:
                raise
            sleep(base_delay * (2**attempt))
    raise AssertionError("unreachable")


@dataclass
class MapOutcome:
    """Result slot for one item of a bounded parallel map."""

    index: int
    value: Any = None
    error: Exception | None = None


def map_bounded(
    fn: Callable[[T], R], items: Sequence[T] | Iterable[T], max_workers: int = 4
) -> list[MapOutcome]:
    """Apply ``fn`` to every item with bounded parallelism.

    Output order matches input order regardless of completion order; each
    item's exception (if any) is captured in its slot rather than raised.
    """
    items = list(items)
    outcomes = [MapOutcome(index=i) for i in range(len(items))]
    if not items:
        return outcomes
    max_workers = max(1, min(max_workers, len(items)))

    def run(i: int) -> None:
        try:
            outcomes[i].value = fn(items[i])
        except Exception as exc:  # captured per item
            outcomes[i].error = exc

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        list(pool.map(run, range(len(items))))
    return outcomes
