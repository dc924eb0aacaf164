"""Locate and validate the JSON answers judges return.

Judges wrap answers in code fences, prepend prose, paraphrase fact text,
skip facts or invent extra ones. The parsers here tolerate those deviations
and record one :class:`ParseWarning` per tolerated deviation; anything that
cannot be interpreted raises :class:`~summarena.errors.ValidationError`.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass
from typing import Any

from .core import (
    AlignmentEntry,
    AlignmentSet,
    FactSource,
    FaithfulnessLabels,
    KeyFact,
    KeyFactSet,
    normalize_key_fact,
)
from .errors import ParseError, ValidationError

KEY_FACT = "key fact"
RESPONSE = "response"
LINE_NUMBER = "line number"
ALIGNMENT_KEYS = (KEY_FACT, RESPONSE, LINE_NUMBER)

_FENCE = re.compile(r"```[A-Za-z0-9_-]*[ \t]*\n?(.*?)```", re.DOTALL)
_decoder = json.JSONDecoder()


@dataclass(frozen=True)
class ParseWarning:
    code: str
    detail: str
    fact_ordinal: int | None = None

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def extract_json_payload(raw_text: str) -> str:
    """Return the first balanced, decodable JSON array in ``raw_text``.

    Fenced blocks are searched before the surrounding text.
    """
    if not raw_text or not raw_text.strip():
        raise ParseError("judge response is empty")
    candidates = [m.group(1) for m in _FENCE.finditer(raw_text)]
    candidates.append(raw_text)
    for text in candidates:
        found = _first_array(text)
        if found is not None:
            return found
    raise ParseError(f"no JSON array found in judge response: {raw_text[:120]!r}")


def _first_array(text: str) -> str | None:
    start = text.find("[")
    while start != -1:
        try:
            value, end = _decoder.raw_decode(text, start)
        except json.JSONDecodeError:
            value = None
        if isinstance(value, list):
            return text[start:end]
        start = text.find("[", start + 1)
    return None


def _load_array(payload: str | list) -> list:
    if isinstance(payload, str):
        try:
            payload = json.loads(payload)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"payload is not valid JSON: {exc}") from exc
    if not isinstance(payload, list):
        raise ValidationError(f"expected a JSON array, got {type(payload).__name__}")
    return payload


def _normalize_response(value: Any, index: int) -> bool:
    if isinstance(value, str):
        word = value.strip().rstrip(".!").strip().lower()
        if word == "yes":
            return True
        if word == "no":
            return False
    raise ValidationError(f"element {index}: response {value!r} is neither Yes nor No")


def _line_list(value: Any, index: int) -> list[int]:
    if not isinstance(value, list) or not all(
        isinstance(n, int) and not isinstance(n, bool) for n in value
    ):
        raise ValidationError(f"element {index}: line number must be an array of integers, got {value!r}")
    return value


@dataclass
class _Element:
    index: int
    fact_text: str
    supported: bool
    lines: list[int]


def _alignment_elements(items: list) -> list[_Element]:
    elements = []
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            raise ValidationError(f"element {i} is not an object")
        missing = [k for k in ALIGNMENT_KEYS if k not in item]
        if missing:
            raise ValidationError(f"element {i} is missing keys {missing}")
        fact = item[KEY_FACT]
        if not isinstance(fact, str):
            raise ValidationError(f"element {i}: key fact must be a string")
        elements.append(
            _Element(
                index=i,
                fact_text=fact,
                supported=_normalize_response(item[RESPONSE], i),
                lines=_line_list(item[LINE_NUMBER], i),
            )
        )
    return elements


def _to_entry(
    element: _Element, ordinal: int, num_lines: int, warnings: list[ParseWarning]
) -> AlignmentEntry:
    kept: set[int] = set()
    for n in element.lines:
        if 1 <= n <= num_lines:
            kept.add(n)
        else:
            warnings.append(
                ParseWarning("dropped_line", f"line {n} outside 1..{num_lines}", ordinal)
            )
    if not element.supported and kept:
        warnings.append(
            ParseWarning("lines_on_unsupported", f"ignored lines {sorted(kept)} for a No verdict", ordinal)
        )
        kept = set()
    return AlignmentEntry(fact_ordinal=ordinal, supported=element.supported, line_numbers=frozenset(kept))


def parse_alignment_response(
    payload: str | list,
    expected_facts: KeyFactSet,
    num_lines: int,
    *,
    summary_id: str = "",
) -> tuple[AlignmentSet, list[ParseWarning]]:
    """Map a judge's alignment answer onto ``expected_facts``.

    Elements are matched to facts by normalized text first; leftovers are
    paired with the remaining facts in order. Facts left without an element
    are filled as unsupported and surplus elements are dropped.
    """
    elements = _alignment_elements(_load_array(payload))
    warnings: list[ParseWarning] = []

    by_text = {f.normalized: f.ordinal for f in expected_facts}
    assigned: dict[int, _Element] = {}
    leftovers: list[_Element] = []
    for element in elements:
        ordinal = by_text.get(normalize_key_fact(element.fact_text))
        if ordinal is not None and ordinal not in assigned:
            assigned[ordinal] = element
        else:
            leftovers.append(element)

    open_ordinals = [f.ordinal for f in expected_facts if f.ordinal not in assigned]
    for ordinal, element in zip(open_ordinals, leftovers):
        assigned[ordinal] = element
        warnings.append(
            ParseWarning("matched_by_position", f"element {element.index} {element.fact_text!r}", ordinal)
        )
    for element in leftovers[len(open_ordinals):]:
        warnings.append(ParseWarning("extra_fact", f"element {element.index} {element.fact_text!r}"))

    entries = []
    for fact in expected_facts:
        element = assigned.get(fact.ordinal)
        if element is None:
            warnings.append(ParseWarning("missing_fact", fact.text, fact.ordinal))
            entries.append(AlignmentEntry(fact.ordinal, False))
        else:
            entries.append(_to_entry(element, fact.ordinal, num_lines, warnings))
    warnings.sort(key=lambda w: (w.fact_ordinal is None, w.fact_ordinal or 0))
    return AlignmentSet(tuple(entries), target_summary_id=summary_id), warnings


def parse_combined_response(
    payload: str | list,
    num_lines: int,
    max_facts: int,
    *,
    summary_id: str = "",
) -> tuple[KeyFactSet, AlignmentSet, list[ParseWarning]]:
    """Parse an answer to the combined prompt, where the judge also produced the facts."""
    elements = _alignment_elements(_load_array(payload))
    warnings: list[ParseWarning] = []
    kept: list[_Element] = []
    seen: set[str] = set()
    for element in elements:
        key = normalize_key_fact(element.fact_text)
        if not key:
            warnings.append(ParseWarning("empty_fact", f"element {element.index}"))
        elif key in seen:
            warnings.append(ParseWarning("duplicate_fact", f"element {element.index} {element.fact_text!r}"))
        elif len(kept) >= max_facts:
            warnings.append(ParseWarning("truncated_fact", f"element {element.index} beyond {max_facts} facts"))
        else:
            seen.add(key)
            kept.append(element)
    if not kept:
        raise ValidationError("judge answer contains no key facts")
    facts = KeyFactSet(
        tuple(KeyFact(e.fact_text.strip(), i) for i, e in enumerate(kept, start=1)),
        source=FactSource.CONCATENATED_PAIR,
        max_facts=max_facts,
    )
    entries = [_to_entry(e, i, num_lines, warnings) for i, e in enumerate(kept, start=1)]
    return facts, AlignmentSet(tuple(entries), target_summary_id=summary_id), warnings


def parse_key_facts_response(
    payload: str | list,
    max_facts: int,
    source: FactSource | str = FactSource.CONCATENATED_PAIR,
) -> tuple[KeyFactSet, list[ParseWarning]]:
    """Parse an extraction answer: an array of strings (or objects with a "key fact")."""
    items = _load_array(payload)
    warnings: list[ParseWarning] = []
    texts: list[str] = []
    seen: set[str] = set()
    for i, item in enumerate(items):
        if isinstance(item, dict) and isinstance(item.get(KEY_FACT), str):
            item = item[KEY_FACT]
        if not isinstance(item, str):
            raise ValidationError(f"element {i} is not a key-fact string")
        key = normalize_key_fact(item)
        if not key:
            warnings.append(ParseWarning("empty_fact", f"element {i}"))
        elif key in seen:
            warnings.append(ParseWarning("duplicate_fact", f"element {i} {item!r}"))
        elif len(texts) >= max_facts:
            warnings.append(ParseWarning("truncated_fact", f"element {i} beyond {max_facts} facts"))
        else:
            seen.add(key)
            texts.append(item.strip())
    if not texts:
        raise ValidationError("judge answer contains no key facts")
    facts = KeyFactSet(
        tuple(KeyFact(t, i) for i, t in enumerate(texts, start=1)),
        source=FactSource(source),
        max_facts=max_facts,
    )
    return facts, warnings


def parse_faithfulness_response(
    payload: str | list, num_sentences: int
) -> tuple[FaithfulnessLabels, list[ParseWarning]]:
    items = _load_array(payload)
    warnings: list[ParseWarning] = []
    verdicts: dict[int, bool] = {}
    for i, item in enumerate(items):
        if not isinstance(item, dict) or LINE_NUMBER not in item or RESPONSE not in item:
            raise ValidationError(f"element {i} must carry {LINE_NUMBER!r} and {RESPONSE!r}")
        line = item[LINE_NUMBER]
        if isinstance(line, list) and len(line) == 1:
            line = line[0]
        if not isinstance(line, int) or isinstance(line, bool):
            raise ValidationError(f"element {i}: line number must be an integer, got {line!r}")
        verdict = _normalize_response(item[RESPONSE], i)
        if not 1 <= line <= num_sentences:
            warnings.append(ParseWarning("dropped_line", f"line {line} outside 1..{num_sentences}"))
        elif line in verdicts:
            warnings.append(ParseWarning("duplicate_line", f"line {line} judged twice; first kept"))
        else:
            verdicts[line] = verdict
    missing = [n for n in range(1, num_sentences + 1) if n not in verdicts]
    if missing:
        raise ValidationError(f"no verdict for summary lines {missing}")
    return FaithfulnessLabels(tuple(verdicts[n] for n in range(1, num_sentences + 1))), warnings


def serialize_alignment(alignment: AlignmentSet, facts: KeyFactSet) -> str:
    """Render an alignment back into the judge answer schema."""
    by_ordinal = {f.ordinal: f.text for f in facts}
    items = [
        {
            KEY_FACT: by_ordinal[e.fact_ordinal],
            RESPONSE: "Yes" if e.supported else "No",
            LINE_NUMBER: sorted(e.line_numbers),
        }
        for e in alignment.entries
    ]
    return json.dumps(items, ensure_ascii=False)
