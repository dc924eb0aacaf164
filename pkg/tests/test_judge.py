import json
import socket

import httpx
import pytest

from summarena.core import KeyFactSet, SummaryDoc
from summarena.errors import JudgeConfigError, JudgeError, ParseError, RateLimitError, TransportError
from summarena.judge import (
    ChatCompletionBackend,
    Judge,
    JudgeRequest,
    MockBackend,
    ResponseCache,
    TokenBucket,
    mock_align,
    mock_extract,
)
from summarena.promptkit import PromptKit

ENV = {"JUDGE_KEY": "sk-test-123"}


class Scripted:
    def __init__(self, *answers):
        self.answers = list(answers)
        self.prompts = []

    def generate(self, request):
        self.prompts.append(request.prompt)
        answer = self.answers.pop(0)
        if isinstance(answer, Exception):
            raise answer
        return answer


def test_cache_key_covers_request_fields():
    base = JudgeRequest("p", "m")
    assert base.cache_key() == JudgeRequest("p", "m").cache_key()
    others = [JudgeRequest("q", "m"), JudgeRequest("p", "n"), JudgeRequest("p", "m", 0.5), JudgeRequest("p", "m", 0, 10)]
    assert len({base.cache_key()} | {r.cache_key() for r in others}) == 5


def test_memory_cache_hit():
    backend = Scripted("answer")
    judge = Judge(backend)
    first = judge.complete(judge.request("p"))
    second = judge.complete(judge.request("p"))
    assert not first.cached and second.cached
    assert second.raw_text == "answer" and second.latency_ms == 0
    assert judge.backend_calls == 1


def test_disk_cache_round_trip_is_byte_identical(tmp_path):
    raw = 'x\r\n  "ünïcode" ```[1]```\n\n'
    Judge(Scripted(raw), cache=ResponseCache(tmp_path)).complete(JudgeRequest("p", "mock"))
    assert len(list(tmp_path.glob("*.json"))) == 1
    fresh = Judge(Scripted(), cache=ResponseCache(tmp_path))
    hit = fresh.complete(JudgeRequest("p", "mock"))
    assert hit.cached and hit.raw_text == raw
    assert fresh.backend_calls == 0


def test_unreadable_cache_entry_is_a_miss(tmp_path):
    cache = ResponseCache(tmp_path)
    key = JudgeRequest("p", "mock").cache_key()
    (tmp_path / f"{key}.json").write_text("{broken")
    assert cache.get(key) is None


def test_transport_error_after_retries():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    backend = ChatCompletionBackend(f"http://127.0.0.1:{port}/v1/chat/completions", "m", "JUDGE_KEY", environ=ENV, timeout=2)
    judge = Judge(backend, max_retries=0)
    with pytest.raises(TransportError):
        judge.complete(judge.request("hello"))


def _client(handler):
    return httpx.Client(transport=httpx.MockTransport(handler))


def test_rate_limit_is_retried_with_backoff():
    calls = []

    def handler(request):
        calls.append(json.loads(request.content))
        if len(calls) < 3:
            return httpx.Response(429)
        return httpx.Response(200, json={"choices": [{"message": {"content": "[]"}}]})

    sleeps = []
    backend = ChatCompletionBackend("http://judge/v1", "gpt", "JUDGE_KEY", environ=ENV, client=_client(handler))
    judge = Judge(backend, model_id="gpt", max_retries=3, backoff_base=0.5, sleep=sleeps.append)
    assert judge.complete(judge.request("hi")).raw_text == "[]"
    assert sleeps == [0.5, 1.0]
    assert calls[0]["messages"] == [{"role": "user", "content": "hi"}]
    assert calls[0]["temperature"] == 0.0


def test_rate_limit_exhausted():
    backend = ChatCompletionBackend(
        "http://judge/v1", "gpt", "JUDGE_KEY", environ=ENV, client=_client(lambda r: httpx.Response(429))
    )
    sleeps = []
    judge = Judge(backend, max_retries=2, backoff_base=1, backoff_max=1.5, sleep=sleeps.append)
    with pytest.raises(TransportError) as info:
        judge.complete(judge.request("hi"))
    assert isinstance(info.value.__cause__, RateLimitError)
    assert sleeps == [1, 1.5]


def test_client_error_is_not_retried():
    backend = ChatCompletionBackend(
        "http://judge/v1", "gpt", "JUDGE_KEY", environ=ENV, client=_client(lambda r: httpx.Response(400, text="bad"))
    )
    judge = Judge(backend, max_retries=3, sleep=lambda s: None)
    with pytest.raises(JudgeError):
        judge.complete(judge.request("hi"))
    assert judge.backend_calls == 1


@pytest.mark.parametrize("environ", [{}, {"JUDGE_KEY": ""}, {"JUDGE_KEY": "sk bad"}, {"JUDGE_KEY": "sk\n"}])
def test_missing_or_malformed_credential(environ):
    with pytest.raises(JudgeConfigError):
        ChatCompletionBackend("http://judge/v1", "gpt", "JUDGE_KEY", environ=environ)


def test_token_bucket_waits_when_empty():
    now = [0.0]
    waits = []

    def sleep(dt):
        waits.append(dt)
        now[0] += dt

    bucket = TokenBucket(2.0, capacity=1, clock=lambda: now[0], sleep=sleep)
    bucket.acquire()
    bucket.acquire()
    assert waits == [0.5]


def test_reask_once_then_propagate():
    backend = Scripted("junk", "[1]")
    judge = Judge(backend)

    def parse(raw):
        if not raw.startswith("["):
            raise ParseError("not an array")
        return raw

    assert judge.ask("prompt", parse) == "[1]"
    assert "not an array" in backend.prompts[1]
    with pytest.raises(ParseError):
        Judge(Scripted("junk", "still junk")).ask("prompt", parse)


def test_mock_extract_dedups_and_truncates():
    assert mock_extract("A. B. A.", 16).texts == ["a", "b"]
    many = " ".join(f"Sentence number {i}." for i in range(40))
    assert len(mock_extract(many, 16)) == 16
    assert mock_extract("Kevin Carr ran with his tent.", 16).texts == ["kevin carr ran with his tent"]


def test_mock_extract_clips_long_sentences():
    long = " ".join(f"w{i}" for i in range(30)) + "."
    assert len(mock_extract(long, 5).texts[0].split()) == 20


def summary(*lines):
    return SummaryDoc("s", "m", "x", lines)


def test_mock_align_examples():
    facts = KeyFactSet.build(["budget approved for June"])
    al = mock_align(facts, summary("Nothing here.", "Budget approved for June."))
    assert al.entries[0].supported and al.entries[0].line_numbers == {2}
    al = mock_align(KeyFactSet.build(["zebra quokka"]), summary("Budget approved."))
    assert not al.entries[0].supported and al.entries[0].line_numbers == frozenset()
    al = mock_align(KeyFactSet.build(["alpha beta gamma"]), summary("alpha beta delta"))
    assert al.entries[0].supported
    al = mock_align(KeyFactSet.build(["alpha beta gamma"]), summary("alpha beta delta"), threshold=0.7)
    assert not al.entries[0].supported


def test_mock_backend_is_deterministic_and_answers_every_template():
    kit = PromptKit()
    doc = summary("The budget was approved.", "Lunch was nice.")
    prompts = [
        kit.render_combined_prompt("The budget was approved.\n\nThe launch moved.", doc, 16),
        kit.render_extraction_prompt("The budget was approved. The launch moved.", 16),
        kit.render_alignment_prompt(KeyFactSet.build(["the budget was approved"]), doc),
    ]
    backend = MockBackend()
    for p in prompts:
        out = backend.generate(JudgeRequest(p, "mock"))
        assert out == MockBackend().generate(JudgeRequest(p, "mock"))
        json.loads(out)
    combined = json.loads(backend.generate(JudgeRequest(prompts[0], "mock")))
    assert [(x["key fact"], x["response"], x["line number"]) for x in combined] == [
        ("the budget was approved", "Yes", [1]),
        ("the launch moved", "No", []),
    ]
    with pytest.raises(JudgeError):
        backend.generate(JudgeRequest("Something else entirely", "mock"))


def test_warm_cache_makes_no_backend_calls(tmp_path):
    kit = PromptKit()
    prompt = kit.render_extraction_prompt("One thing. Another thing.", 4)
    Judge(MockBackend(), cache=ResponseCache(tmp_path)).complete(JudgeRequest(prompt, "mock"))
    warm = Judge(MockBackend(), cache=ResponseCache(tmp_path))
    assert warm.complete(warm.request(prompt)).cached
    assert warm.backend_calls == 0
