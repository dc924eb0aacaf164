"""Judge backends and the caching, retrying client in front of them.

Two backends are provided. :class:`ChatCompletionBackend` posts prompts to a
chat-completion HTTP endpoint. :class:`MockBackend` answers the package's own
prompts with a lexical-overlap heuristic so whole tournaments run offline
and deterministically.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol, TypeVar

import httpx

from . import promptkit
from .core import (
    AlignmentEntry,
    AlignmentSet,
    FactSource,
    KeyFactSet,
    SummaryDoc,
    normalize_key_fact,
    split_into_lines,
)
from .errors import JudgeConfigError, JudgeError, ParseError, RateLimitError, TransportError

logger = logging.getLogger(__name__)

T = TypeVar("T")

DEFAULT_MAX_OUTPUT_TOKENS = 4096
DEFAULT_ALIGN_THRESHOLD = 0.6
MOCK_FACT_TOKENS = 20


@dataclass(frozen=True)
class JudgeRequest:
    prompt: str
    judge_model_id: str
    temperature: float = 0.0
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS
    seed_hint: int | None = None

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("judge prompt must be non-empty")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be positive")

    def cache_key(self) -> str:
        material = json.dumps(
            [self.prompt, self.judge_model_id, self.temperature, self.max_output_tokens],
            ensure_ascii=False,
        )
        return hashlib.sha256(material.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class JudgeResponse:
    raw_text: str
    judge_model_id: str
    cached: bool
    latency_ms: int


class Backend(Protocol):
    def generate(self, request: JudgeRequest) -> str: ...


class ResponseCache:
    """Content-addressed response store, one JSON file per request hash.

    With ``directory=None`` the cache lives in memory only.
    """

    def __init__(self, directory: str | Path | None = None):
        self.directory = Path(directory) if directory is not None else None
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
        self._memory: dict[str, str] = {}
        self._lock = threading.Lock()

    def _path(self, key: str) -> Path:
        assert self.directory is not None
        return self.directory / f"{key}.json"

    def get(self, key: str) -> str | None:
        with self._lock:
            if key in self._memory:
                return self._memory[key]
        if self.directory is None:
            return None
        path = self._path(key)
        try:
            record = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            return None
        except (OSError, json.JSONDecodeError):
            logger.warning("ignoring unreadable cache entry %s", path)
            return None
        raw = record["raw_text"]
        with self._lock:
            self._memory[key] = raw
        return raw

    def put(self, key: str, raw_text: str, request: JudgeRequest) -> None:
        with self._lock:
            self._memory[key] = raw_text
        if self.directory is None:
            return
        record = {
            "raw_text": raw_text,
            "judge_model_id": request.judge_model_id,
            "temperature": request.temperature,
            "max_output_tokens": request.max_output_tokens,
        }
        atomic_write_text(self._path(key), json.dumps(record, ensure_ascii=False))


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class TokenBucket:
    """Blocking token-bucket limiter; ``rate`` tokens per second."""

    def __init__(self, rate: float, capacity: float | None = None, clock=time.monotonic, sleep=time.sleep):
        if rate <= 0:
            raise ValueError("rate must be positive")
        self.rate = rate
        self.capacity = capacity if capacity is not None else max(1.0, rate)
        self._tokens = self.capacity
        self._clock = clock
        self._sleep = sleep
        self._stamp = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self.capacity, self._tokens + (now - self._stamp) * self.rate)
                self._stamp = now
                if self._tokens >= 1:
                    self._tokens -= 1
                    return
                wait = (1 - self._tokens) / self.rate
            self._sleep(wait)


class Judge:
    """Caching, retrying, rate-limited front end over a :class:`Backend`."""

    def __init__(
        self,
        backend: Backend,
        *,
        model_id: str = "mock",
        cache: ResponseCache | None = None,
        temperature: float = 0.0,
        max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS,
        max_retries: int = 3,
        backoff_base: float = 0.5,
        backoff_max: float = 8.0,
        max_in_flight: int = 4,
        rate_limiter: TokenBucket | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.backend = backend
        self.model_id = model_id
        self.cache = cache if cache is not None else ResponseCache()
        self.temperature = temperature
        self.max_output_tokens = max_output_tokens
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.backoff_max = backoff_max
        self.rate_limiter = rate_limiter
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._sleep = sleep
        self._count_lock = threading.Lock()
        self.backend_calls = 0

    def request(self, prompt: str) -> JudgeRequest:
        return JudgeRequest(
            prompt=prompt,
            judge_model_id=self.model_id,
            temperature=self.temperature,
            max_output_tokens=self.max_output_tokens,
        )

    def complete(self, request: JudgeRequest) -> JudgeResponse:
        key = request.cache_key()
        hit = self.cache.get(key)
        if hit is not None:
            return JudgeResponse(hit, request.judge_model_id, cached=True, latency_ms=0)

        started = time.monotonic()
        raw = self._generate_with_retry(request)
        latency = int((time.monotonic() - started) * 1000)
        self.cache.put(key, raw, request)
        return JudgeResponse(raw, request.judge_model_id, cached=False, latency_ms=latency)

    def _generate_with_retry(self, request: JudgeRequest) -> str:
        attempt = 0
        while True:
            if self.rate_limiter is not None:
                self.rate_limiter.acquire()
            try:
                with self._slots:
                    with self._count_lock:
                        self.backend_calls += 1
                    return self.backend.generate(request)
            except TransportError as exc:
                if attempt >= self.max_retries:
                    raise TransportError(
                        f"judge unreachable after {attempt + 1} attempt(s): {exc}"
                    ) from exc
                delay = min(self.backoff_max, self.backoff_base * 2**attempt)
                logger.warning("judge call failed (%s); retry %d in %.2fs", exc, attempt + 1, delay)
                self._sleep(delay)
                attempt += 1

    def ask(self, prompt: str, parse: Callable[[str], T]) -> T:
        """Complete ``prompt`` and parse the answer, re-asking once on a parse failure.

        ``parse`` receives the raw response text. The second failure propagates.
        """
        raw = self.complete(self.request(prompt)).raw_text
        try:
            return parse(raw)
        except ParseError as exc:
            logger.info("judge answer rejected (%s); re-asking once", exc)
            retry_prompt = prompt + promptkit.reask_suffix(str(exc))
            raw = self.complete(self.request(retry_prompt)).raw_text
            return parse(raw)


_KEY_PATTERN = re.compile(r"[\x21-\x7e]+")


class ChatCompletionBackend:
    """Posts prompts to an OpenAI-style ``/chat/completions`` endpoint.

    Each call is a fresh single-message conversation. The API key is read
    from the environment variable named by ``api_key_env``.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key_env: str = "OPENAI_API_KEY",
        *,
        timeout: float = 120.0,
        client: httpx.Client | None = None,
        environ: dict[str, str] | None = None,
    ):
        if not endpoint:
            raise JudgeConfigError("remote judge needs an endpoint URL")
        env = os.environ if environ is None else environ
        key = env.get(api_key_env)
        if key is None:
            raise JudgeConfigError(f"environment variable {api_key_env} is not set")
        if not _KEY_PATTERN.fullmatch(key):
            raise JudgeConfigError(f"credential in {api_key_env} is malformed")
        self.endpoint = endpoint
        self.model = model
        self._headers = {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}
        self._client = client or httpx.Client(timeout=timeout)

    def generate(self, request: JudgeRequest) -> str:
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        if request.seed_hint is not None:
            body["seed"] = request.seed_hint
        try:
            resp = self._client.post(self.endpoint, json=body, headers=self._headers)
        except httpx.TransportError as exc:
            raise TransportError(f"{type(exc).__name__}: {exc}") from exc
        if resp.status_code == 429:
            raise RateLimitError("judge endpoint returned HTTP 429")
        if resp.status_code >= 500:
            raise TransportError(f"judge endpoint returned HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise JudgeError(f"judge endpoint rejected the request: HTTP {resp.status_code} {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise JudgeError(f"unexpected chat-completion response shape: {resp.text[:200]}") from exc


# --- deterministic lexical mock -------------------------------------------

_STOPWORDS = frozenset(
    """
    a an the and or but if then than so of to in on at by for with from into onto over under
    about as is are was were be been being am do does did has have had having it its this
    that these those there here he she they we you i me him her them us our your their his
    my mine not no yes will would shall should can could may might must also just very
    which who whom whose what when where why how all any each both some such only own same
    too s t
    """.split()
)
_TOKEN = re.compile(r"[a-z0-9]+")
_NUMBERED_LINE = re.compile(r"^\d+\.\s")


def content_words(text: str) -> set[str]:
    return {w for w in _TOKEN.findall(text.lower()) if w not in _STOPWORDS}


def mock_extract(
    paragraph: str,
    max_facts: int,
    source: FactSource | str = FactSource.CONCATENATED_PAIR,
) -> KeyFactSet:
    """Every sentence becomes a key fact: normalized, clipped, deduplicated, truncated."""
    clipped = []
    for sentence in split_into_lines(paragraph):
        tokens = normalize_key_fact(sentence).split(" ")
        clipped.append(normalize_key_fact(" ".join(tokens[:MOCK_FACT_TOKENS])))
    return KeyFactSet.build(clipped, source=source, max_facts=max_facts)


def mock_align(
    facts: KeyFactSet, summary: SummaryDoc, threshold: float = DEFAULT_ALIGN_THRESHOLD
) -> AlignmentSet:
    """A line supports a fact when it contains at least ``threshold`` of the fact's content words."""
    line_words = [content_words(s) for s in summary.sentences]
    entries = []
    for fact in facts:
        words = content_words(fact.text)
        lines = frozenset()
        if words:
            lines = frozenset(
                j
                for j, lw in enumerate(line_words, start=1)
                if len(words & lw) / len(words) >= threshold
            )
        entries.append(AlignmentEntry(fact.ordinal, bool(lines), lines))
    return AlignmentSet(tuple(entries), target_summary_id=summary.summary_id)


def mock_faithfulness(transcript_text: str, sentences: list[str]) -> list[bool]:
    """A sentence is faithful unless it shares no content word with the transcript."""
    vocabulary = content_words(transcript_text)
    return [bool(content_words(s) & vocabulary) for s in sentences]


def _section(prompt: str, header: str, end_marker: str | None = None) -> str:
    start = prompt.index(header) + len(header)
    if end_marker is None:
        return prompt[start:].rstrip("\n")
    return prompt[start:prompt.rindex(end_marker)]


def _numbered_items(block: str) -> list[str]:
    return [_NUMBERED_LINE.sub("", line, count=1) for line in block.split("\n") if line.strip()]


def _max_facts_in(prompt: str) -> int:
    match = re.search(r"\(at most (\d+)\)", prompt)
    if match is None:
        raise JudgeError("mock judge cannot find the key-fact limit in the prompt")
    return int(match.group(1))


def _summary_from_prompt(prompt: str) -> SummaryDoc:
    block = prompt[prompt.rindex(promptkit.SUMMARY_HEADER) + len(promptkit.SUMMARY_HEADER):]
    return SummaryDoc("mock", "mock", "mock", tuple(_numbered_items(block)))


def _alignment_json(facts: KeyFactSet, alignment: AlignmentSet) -> str:
    items = [
        {
            "key fact": fact.text,
            "response": "Yes" if entry.supported else "No",
            "line number": sorted(entry.line_numbers),
        }
        for fact, entry in zip(facts, alignment.entries)
    ]
    return json.dumps(items, ensure_ascii=False)


class MockBackend:
    """Answers the packaged prompt templates without a model.

    The prompt kind is recognised from its first line and the inputs are
    read back from the section headers, so custom templates must keep both.
    """

    def __init__(self, threshold: float = DEFAULT_ALIGN_THRESHOLD):
        self.threshold = threshold

    def generate(self, request: JudgeRequest) -> str:
        prompt = request.prompt.split(promptkit.REASK_MARKER, 1)[0]
        first_line = prompt.split("\n", 1)[0]
        if first_line.startswith("You will be provided with a paragraph and a summary"):
            paragraph = _section(prompt, promptkit.PARAGRAPH_HEADER, promptkit.COMBINED_ALIGNMENT_INTRO)
            facts = mock_extract(paragraph, _max_facts_in(prompt))
            summary = _summary_from_prompt(prompt)
            return _alignment_json(facts, mock_align(facts, summary, self.threshold))
        if first_line.startswith("You will be provided with a paragraph"):
            paragraph = _section(prompt, promptkit.PARAGRAPH_HEADER)
            return json.dumps(mock_extract(paragraph, _max_facts_in(prompt)).texts, ensure_ascii=False)
        if first_line.startswith("You will be provided with a set of key facts"):
            block = _section(prompt, promptkit.KEY_FACTS_HEADER, "\n\n" + promptkit.SUMMARY_HEADER)
            facts = KeyFactSet.build(_numbered_items(block))
            summary = _summary_from_prompt(prompt)
            return _alignment_json(facts, mock_align(facts, summary, self.threshold))
        if first_line.startswith("You will be provided with a meeting transcript"):
            transcript = _section(prompt, promptkit.TRANSCRIPT_HEADER, "\n\n" + promptkit.SUMMARY_HEADER)
            summary = _summary_from_prompt(prompt)
            verdicts = mock_faithfulness(transcript, list(summary.sentences))
            items = [
                {"line number": i, "reason": "lexical overlap check", "response": "Yes" if ok else "No"}
                for i, ok in enumerate(verdicts, start=1)
            ]
            return json.dumps(items, ensure_ascii=False)
        raise JudgeError(f"mock judge does not recognise prompt starting {first_line[:60]!r}")
