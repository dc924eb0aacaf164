"""Domain types, text normalization and sentence splitting.

Every type here is an immutable value object; invariants are enforced in
``__post_init__`` so an instance that exists is always valid.
"""

from __future__ import annotations

import enum
import hashlib
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import InputError

DEFAULT_MAX_SUMMARY_LINES = 200

_SENTENCE_BOUNDARY = re.compile(r"(?<=[.!?])\s+")
_WHITESPACE = re.compile(r"\s+")
_TERMINAL_CHARS = " .!?;:,"


def split_into_lines(raw_text: str) -> list[str]:
    """Split raw summary text into sentences.

    Newlines are split first, then each line is split after ``.``, ``!`` or
    ``?`` when followed by whitespace. Segments are trimmed and empty ones
    dropped.

    Raises:
        InputError: if nothing is left after trimming.
    """
    sentences = []
    for line in raw_text.splitlines():
        for segment in _SENTENCE_BOUNDARY.split(line):
            segment = segment.strip()
            if segment:
                sentences.append(segment)
    if not sentences:
        raise InputError("empty summary")
    return sentences


def normalize_key_fact(text: str) -> str:
    """Canonical form used for key-fact deduplication and matching."""
    collapsed = _WHITESPACE.sub(" ", text).strip().lower()
    return collapsed.rstrip(_TERMINAL_CHARS)


class FactSource(str, enum.Enum):
    CONCATENATED_PAIR = "concatenated_pair"
    HUMAN_SUMMARY = "human_summary"
    MACHINE_SUMMARY = "machine_summary"
    TRANSCRIPT = "transcript"


@dataclass(frozen=True)
class Turn:
    speaker: str
    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise InputError(f"turn by {self.speaker!r} has empty text")


@dataclass(frozen=True)
class Transcript:
    meeting_id: str
    turns: tuple[Turn, ...]

    def __post_init__(self) -> None:
        if not self.meeting_id:
            raise InputError("transcript meeting_id must be non-empty")
        if not self.turns:
            raise InputError(f"transcript {self.meeting_id!r} has no turns")
        object.__setattr__(self, "turns", tuple(self.turns))

    def render(self) -> str:
        """Render as ``speaker: text`` lines."""
        return "\n".join(f"{t.speaker}: {t.text.strip()}" for t in self.turns)


@dataclass(frozen=True)
class SummaryDoc:
    """A candidate summary as an ordered list of sentences numbered from 1."""

    summary_id: str
    meeting_id: str
    model_id: str
    sentences: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "sentences", tuple(self.sentences))
        if not self.sentences:
            raise InputError(f"summary {self.summary_id!r} has no sentences")
        for i, sentence in enumerate(self.sentences, start=1):
            if not sentence.strip():
                raise InputError(f"summary {self.summary_id!r} line {i} is empty")

    @classmethod
    def from_text(
        cls,
        meeting_id: str,
        model_id: str,
        text: str,
        *,
        summary_id: str | None = None,
        max_lines: int = DEFAULT_MAX_SUMMARY_LINES,
    ) -> SummaryDoc:
        try:
            sentences = split_into_lines(text)
        except InputError as exc:
            raise InputError(f"summary for {meeting_id}/{model_id}: {exc}") from exc
        if len(sentences) > max_lines:
            raise InputError(
                f"summary for {meeting_id}/{model_id} has {len(sentences)} lines, "
                f"more than the limit of {max_lines}"
            )
        return cls(
            summary_id=summary_id or f"{meeting_id}:{model_id}",
            meeting_id=meeting_id,
            model_id=model_id,
            sentences=tuple(sentences),
        )

    @property
    def n(self) -> int:
        return len(self.sentences)

    @property
    def text(self) -> str:
        return "\n".join(self.sentences)

    def numbered(self) -> str:
        """Render as ``1. ...`` lines, the numbering the judge cites."""
        return "\n".join(f"{i}. {s}" for i, s in enumerate(self.sentences, start=1))


@dataclass(frozen=True)
class KeyFact:
    text: str
    ordinal: int

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise InputError("key fact text must be non-empty")
        if self.ordinal < 1:
            raise InputError(f"key fact ordinal must be positive, got {self.ordinal}")

    @property
    def normalized(self) -> str:
        return normalize_key_fact(self.text)


@dataclass(frozen=True)
class KeyFactSet:
    facts: tuple[KeyFact, ...]
    source: FactSource = FactSource.CONCATENATED_PAIR
    max_facts: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "facts", tuple(self.facts))
        object.__setattr__(self, "source", FactSource(self.source))
        seen: set[str] = set()
        for expected, fact in enumerate(self.facts, start=1):
            if fact.ordinal != expected:
                raise InputError(f"key fact ordinals must run 1..n, got {fact.ordinal} at {expected}")
            key = fact.normalized
            if key in seen:
                raise InputError(f"duplicate key fact: {fact.text!r}")
            seen.add(key)
        if self.max_facts is not None and len(self.facts) > self.max_facts:
            raise InputError(f"{len(self.facts)} key facts exceed the maximum of {self.max_facts}")

    @classmethod
    def build(
        cls,
        texts: Iterable[str],
        source: FactSource | str = FactSource.CONCATENATED_PAIR,
        max_facts: int | None = None,
    ) -> KeyFactSet:
        """Dedup (by normalized text, first wins) and truncate raw fact strings."""
        kept: list[str] = []
        seen: set[str] = set()
        for text in texts:
            key = normalize_key_fact(text)
            if not key or key in seen:
                continue
            if max_facts is not None and len(kept) >= max_facts:
                break
            seen.add(key)
            kept.append(text.strip())
        facts = tuple(KeyFact(text=t, ordinal=i) for i, t in enumerate(kept, start=1))
        return cls(facts=facts, source=FactSource(source), max_facts=max_facts)

    def __len__(self) -> int:
        return len(self.facts)

    def __iter__(self):
        return iter(self.facts)

    @property
    def texts(self) -> list[str]:
        return [f.text for f in self.facts]

    def digest(self) -> str:
        """Content hash over normalized fact texts, in order."""
        payload = "\n".join(f.normalized for f in self.facts).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()


@dataclass(frozen=True)
class AlignmentEntry:
    fact_ordinal: int
    supported: bool
    line_numbers: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        object.__setattr__(self, "line_numbers", frozenset(self.line_numbers))
        if self.fact_ordinal < 1:
            raise InputError(f"fact ordinal must be positive, got {self.fact_ordinal}")
        if not self.supported and self.line_numbers:
            raise InputError(f"unsupported fact {self.fact_ordinal} cannot cite lines")
        if any(n < 1 for n in self.line_numbers):
            raise InputError(f"line numbers must be positive: {sorted(self.line_numbers)}")


@dataclass(frozen=True)
class AlignmentSet:
    entries: tuple[AlignmentEntry, ...]
    target_summary_id: str = ""

    def __post_init__(self) -> None:
        entries = tuple(sorted(self.entries, key=lambda e: e.fact_ordinal))
        object.__setattr__(self, "entries", entries)
        ordinals = [e.fact_ordinal for e in entries]
        if ordinals != list(range(1, len(entries) + 1)):
            raise InputError(f"alignment ordinals must be a permutation of 1..{len(entries)}")

    def __len__(self) -> int:
        return len(self.entries)

    def check(self, facts: KeyFactSet, summary: SummaryDoc) -> None:
        """Raise InputError unless this alignment fits ``facts`` against ``summary``."""
        if len(self.entries) != len(facts):
            raise InputError(
                f"alignment has {len(self.entries)} entries for {len(facts)} key facts"
            )
        cited = self.cited_lines()
        if cited and max(cited) > summary.n:
            raise InputError(f"alignment cites line {max(cited)} of a {summary.n}-line summary")

    def cited_lines(self) -> set[int]:
        lines: set[int] = set()
        for entry in self.entries:
            lines |= entry.line_numbers
        return lines


@dataclass(frozen=True)
class MetricScores:
    completeness: float
    conciseness: float
    faithfulness: float | None = None

    def __post_init__(self) -> None:
        for name in ("completeness", "conciseness", "faithfulness"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise InputError(f"{name} must lie in [0, 1], got {value}")

    def get(self, metric: str) -> float:
        value = getattr(self, metric)
        if value is None:
            raise KeyError(metric)
        return value


@dataclass(frozen=True)
class FaithfulnessLabels:
    """Per-sentence verdicts; ``True`` means the sentence is faithful."""

    labels: tuple[bool, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "labels", tuple(bool(x) for x in self.labels))

    def __len__(self) -> int:
        return len(self.labels)

    @classmethod
    def for_summary(cls, summary: SummaryDoc, labels: Sequence[bool]) -> FaithfulnessLabels:
        if len(labels) != summary.n:
            raise InputError(f"{len(labels)} labels for a {summary.n}-sentence summary")
        return cls(tuple(labels))
