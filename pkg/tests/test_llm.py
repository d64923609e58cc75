"""Endpoint clients: request keys, HTTP mapping, cassettes, retries, mapping."""

import json
import threading

import httpx
import pytest

from reviewmill.errors import EndpointError
from reviewmill.llm import (
    CassetteClient,
    GenConfig,
    HttpChatClient,
    MapOutcome,
    RecordingClient,
    map_bounded,
    request_key,
    with_retries,
)

CONFIG = GenConfig(model="m", temperature=0.7, seed=11)


class TestRequestKey:
    def test_deterministic(self):
        assert request_key("p", CONFIG) == request_key("p", CONFIG)

    def test_sensitive_to_every_parameter(self):
        base = request_key("p", CONFIG)
        assert request_key("q", CONFIG) != base
        assert request_key("p", GenConfig(model="other", temperature=0.7, seed=11)) != base
        assert request_key("p", CONFIG.with_seed(12)) != base
        assert request_key("p", GenConfig(model="m", temperature=0.2, seed=11)) != base

    def test_seed_none_differs_from_zero(self):
        with_none = request_key("p", GenConfig(model="m"))
        with_zero = request_key("p", GenConfig(model="m", seed=0))
        assert with_none != with_zero


def http_client(handler):
    transport = httpx.MockTransport(handler)
    return HttpChatClient("http://endpoint.invalid", api_key="k", transport=transport)


class TestHttpChatClient:
    def test_successful_completion(self):
        seen = {}

        def handler(request):
            seen["url"] = str(request.url)
            seen["body"] = json.loads(request.content)
            seen["auth"] = request.headers.get("authorization")
            return httpx.Response(
                200, json={"choices": [{"message": {"content": "answer"}}]}
            )

        client = http_client(handler)
        out = client.complete("the prompt", CONFIG)
        assert out == "answer"
        assert seen["url"].endswith("/v1/chat/completions")
        assert seen["auth"] == "Bearer k"
        assert seen["body"]["model"] == "m"
        assert seen["body"]["messages"] == [{"role": "user", "content": "the prompt"}]
        assert seen["body"]["seed"] == 11

    def test_server_errors_are_transient(self):
        client = http_client(lambda req: httpx.Response(503, json={}))
        with pytest.raises(EndpointError) as info:
            client.complete("p", CONFIG)
        assert info.value.transient

    def test_client_errors_are_not_transient(self):
        client = http_client(lambda req: httpx.Response(400, json={}))
        with pytest.raises(EndpointError) as info:
            client.complete("p", CONFIG)
        assert not info.value.transient

    def test_network_failure_is_transient(self):
        def handler(request):
            raise httpx.ConnectError("no route")

        client = http_client(handler)
        with pytest.raises(EndpointError) as info:
            client.complete("p", CONFIG)
        assert info.value.transient

    def test_malformed_payload_rejected(self):
        client = http_client(lambda req: httpx.Response(200, json={"weird": True}))
        with pytest.raises(EndpointError):
            client.complete("p", CONFIG)


def write_cassette(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")


class TestCassetteClient:
    def test_replays_by_key(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_cassette(path, [{"key": request_key("p", CONFIG), "response": "hi"}])
        client = CassetteClient(path)
        assert client.complete("p", CONFIG) == "hi"

    def test_miss_is_hard_error(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_cassette(path, [{"key": request_key("p", CONFIG), "response": "hi"}])
        client = CassetteClient(path)
        with pytest.raises(EndpointError) as info:
            client.complete("other prompt", CONFIG)
        assert not info.value.transient

    def test_queue_consumed_in_order_then_sticky(self, tmp_path):
        key = request_key("p", CONFIG)
        path = tmp_path / "c.jsonl"
        write_cassette(
            path,
            [
                {"key": key, "error": "busy", "transient": True},
                {"key": key, "response": "recovered"},
            ],
        )
        client = CassetteClient(path)
        with pytest.raises(EndpointError) as info:
            client.complete("p", CONFIG)
        assert info.value.transient
        assert client.complete("p", CONFIG) == "recovered"
        # Sticky last: further identical requests keep replaying the final record.
        assert client.complete("p", CONFIG) == "recovered"

    def test_scripted_retry_sequence_with_retries(self, tmp_path):
        key = request_key("p", CONFIG)
        path = tmp_path / "c.jsonl"
        write_cassette(
            path,
            [
                {"key": key, "error": "busy", "transient": True},
                {"key": key, "error": "busy", "transient": True},
                {"key": key, "response": "third time lucky"},
            ],
        )
        client = CassetteClient(path)
        out = with_retries(
            lambda: client.complete("p", CONFIG), attempts=3, sleep=lambda _: None
        )
        assert out == "third time lucky"

    def test_missing_cassette_file(self, tmp_path):
        with pytest.raises(EndpointError):
            CassetteClient(tmp_path / "absent.jsonl")

    def test_corrupt_record_rejected(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"no_key": 1}\n')
        with pytest.raises(EndpointError):
            CassetteClient(path)


class ScriptedClient:
    def __init__(self, outputs):
        self.outputs = list(outputs)
        self.lock = threading.Lock()

    def complete(self, prompt, config):
        with self.lock:
            item = self.outputs.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


class TestRecordingClient:
    def test_round_trip_through_cassette(self, tmp_path):
        path = tmp_path / "rec.jsonl"
        recorder = RecordingClient(ScriptedClient(["alpha", "beta"]), path)
        assert recorder.complete("p1", CONFIG) == "alpha"
        assert recorder.complete("p2", CONFIG) == "beta"
        replay = CassetteClient(path)
        assert replay.complete("p1", CONFIG) == "alpha"
        assert replay.complete("p2", CONFIG) == "beta"

    def test_errors_are_recorded_too(self, tmp_path):
        path = tmp_path / "rec.jsonl"
        recorder = RecordingClient(
            ScriptedClient([EndpointError("boom", transient=True), "ok"]), path
        )
        with pytest.raises(EndpointError):
            recorder.complete("p", CONFIG)
        assert recorder.complete("p", CONFIG) == "ok"
        replay = CassetteClient(path)
        with pytest.raises(EndpointError) as info:
            replay.complete("p", CONFIG)
        assert info.value.transient
        assert replay.complete("p", CONFIG) == "ok"


class TestWithRetries:
    def test_returns_first_success(self):
        calls = []

        def fn():
            calls.append(1)
            return "v"

        assert with_retries(fn, attempts=3, sleep=lambda _: None) == "v"
        assert len(calls) == 1

    def test_retries_transient_with_backoff(self):
        delays = []
        client = ScriptedClient(
            [
                EndpointError("busy", transient=True),
                EndpointError("busy", transient=True),
                "done",
            ]
        )
        out = with_retries(
            lambda: client.complete("p", CONFIG),
            attempts=3,
            base_delay=0.5,
            sleep=delays.append,
        )
        assert out == "done"
        assert delays == [0.5, 1.0]

    def test_non_transient_fails_immediately(self):
        client = ScriptedClient([EndpointError("bad"), "never"])
        with pytest.raises(EndpointError):
            with_retries(
                lambda: client.complete("p", CONFIG), attempts=3, sleep=lambda _: None
            )
        assert client.outputs == ["never"]

    def test_exhausted_attempts_raise_last_error(self):
        client = ScriptedClient([EndpointError("busy", transient=True)] * 2)
        with pytest.raises(EndpointError):
            with_retries(
                lambda: client.complete("p", CONFIG), attempts=2, sleep=lambda _: None
            )

    def test_zero_attempts_rejected(self):
        with pytest.raises(ValueError):
            with_retries(lambda: 1, attempts=0)


class TestMapBounded:
    def test_preserves_input_order(self):
        out = map_bounded(lambda x: x * 2, [3, 1, 2], max_workers=3)
        assert [o.value for o in out] == [6, 2, 4]
        assert [o.error for o in out] == [None, None, None]

    def test_captures_exceptions_per_item(self):
        def fn(x):
            if x == 2:
                raise ValueError("two")
            return x

        out = map_bounded(fn, [1, 2, 3], max_workers=2)
        assert out[0].value == 1
        assert isinstance(out[1].error, ValueError)
        assert out[2].value == 3

    def test_empty_input(self):
        assert map_bounded(lambda x: x, []) == []

    def test_actually_runs_concurrently(self):
        barrier = threading.Barrier(3, timeout=5)

        def fn(x):
            barrier.wait()  # deadlocks unless three run at once
            return x

        out = map_bounded(fn, [1, 2, 3], max_workers=3)
        assert [o.value for o in out] == [1, 2, 3]
