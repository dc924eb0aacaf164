"""Reference-based absolute scoring.

Key facts are extracted from a reference (a human summary, the machine
summary itself, or the transcript) and each model's summary is aligned
against them independently. Faithfulness is available here but plays no
part in the pairwise ranking.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Mapping

from . import metrics
from .core import FactSource, FaithfulnessLabels, KeyFactSet, MetricScores, SummaryDoc, Transcript
from .errors import EvalError, InputError
from .judge import Judge
from .parse import (
    ParseWarning,
    extract_json_payload,
    parse_alignment_response,
    parse_faithfulness_response,
    parse_key_facts_response,
)
from .promptkit import PromptKit, default_kit

logger = logging.getLogger(__name__)

REFERENCE_KINDS = (FactSource.HUMAN_SUMMARY, FactSource.MACHINE_SUMMARY, FactSource.TRANSCRIPT)


@dataclass(frozen=True)
class ReferenceSource:
    kind: FactSource
    payload: SummaryDoc | Transcript

    def __post_init__(self) -> None:
        kind = FactSource(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind not in REFERENCE_KINDS:
            raise InputError(f"{kind.value} is not a reference source")
        wants = Transcript if kind is FactSource.TRANSCRIPT else SummaryDoc
        if not isinstance(self.payload, wants):
            raise InputError(f"{kind.value} reference needs a {wants.__name__} payload")


def extract_reference_key_facts(
    source: ReferenceSource,
    max_facts: int,
    *,
    judge: Judge,
    kit: PromptKit | None = None,
    warnings: list[ParseWarning] | None = None,
) -> KeyFactSet:
    kit = kit or default_kit()
    if isinstance(source.payload, Transcript):
        paragraph = kit.render_transcript(source.payload)
    else:
        paragraph = source.payload.text
    facts, found = judge.ask(
        kit.render_extraction_prompt(paragraph, max_facts),
        lambda raw: parse_key_facts_response(extract_json_payload(raw), max_facts, source.kind),
    )
    if warnings is not None:
        warnings.extend(found)
    return facts


def score_summary_absolute(
    summary: SummaryDoc,
    facts: KeyFactSet,
    *,
    judge: Judge,
    kit: PromptKit | None = None,
    warnings: list[ParseWarning] | None = None,
) -> MetricScores:
    kit = kit or default_kit()
    alignment, found = judge.ask(
        kit.render_alignment_prompt(facts, summary),
        lambda raw: parse_alignment_response(
            extract_json_payload(raw), facts, summary.n, summary_id=summary.summary_id
        ),
    )
    if warnings is not None:
        warnings.extend(found)
    return MetricScores(
        completeness=metrics.completeness(facts, alignment),
        conciseness=metrics.conciseness(summary, alignment),
    )


def evaluate_faithfulness(
    transcript: Transcript,
    summary: SummaryDoc,
    *,
    judge: Judge,
    kit: PromptKit | None = None,
) -> tuple[FaithfulnessLabels, float]:
    kit = kit or default_kit()
    labels, _ = judge.ask(
        kit.render_faithfulness_prompt(transcript, summary),
        lambda raw: parse_faithfulness_response(extract_json_payload(raw), summary.n),
    )
    return labels, metrics.faithfulness(labels)


@dataclass(frozen=True)
class BaselineRow:
    model_id: str
    completeness: float | None
    conciseness: float | None
    faithfulness: float | None
    meetings: int
    failed: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "model_id": self.model_id,
            "completeness": self.completeness,
            "conciseness": self.conciseness,
            "faithfulness": self.faithfulness,
            "meetings": self.meetings,
            "failed": self.failed,
        }


def reference_for(
    kind: FactSource,
    meeting_id: str,
    summary: SummaryDoc,
    meetings: Mapping[str, Transcript],
    gold: Mapping[str, SummaryDoc],
) -> ReferenceSource:
    if kind is FactSource.MACHINE_SUMMARY:
        return ReferenceSource(kind, summary)
    if kind is FactSource.HUMAN_SUMMARY:
        if meeting_id not in gold:
            raise InputError(f"no gold human summary for meeting {meeting_id}")
        return ReferenceSource(kind, gold[meeting_id])
    if meeting_id not in meetings:
        raise InputError(f"no transcript for meeting {meeting_id}")
    return ReferenceSource(kind, meetings[meeting_id])


def run_baseline(
    summaries: Mapping[tuple[str, str], SummaryDoc],
    reference_kind: FactSource | str,
    *,
    judge: Judge,
    max_facts: int = 16,
    meetings: Mapping[str, Transcript] | None = None,
    gold: Mapping[str, SummaryDoc] | None = None,
    with_faithfulness: bool = False,
    kit: PromptKit | None = None,
) -> list[BaselineRow]:
    """Mean absolute scores per summarizer model over all its meetings.

    Missing references raise :class:`InputError` up front; judge failures
    on individual summaries are counted in ``failed`` and left out of the means.
    """
    kind = FactSource(reference_kind)
    meetings = meetings or {}
    gold = gold or {}
    kit = kit or default_kit()
    keys = sorted(summaries)
    references = {key: reference_for(kind, key[0], summaries[key], meetings, gold) for key in keys}
    if with_faithfulness:
        absent = sorted({m for m, _ in keys if m not in meetings})
        if absent:
            raise InputError(f"faithfulness needs transcripts; missing for {absent}")

    scored: dict[str, list[MetricScores]] = {}
    failures: dict[str, int] = {}
    for key in keys:
        meeting_id, model_id = key
        summary = summaries[key]
        scored.setdefault(model_id, [])
        try:
            # Shared references re-render the same prompt, so the judge cache absorbs repeats.
            facts = extract_reference_key_facts(references[key], max_facts, judge=judge, kit=kit)
            scores = score_summary_absolute(summary, facts, judge=judge, kit=kit)
            if with_faithfulness:
                _, faith = evaluate_faithfulness(meetings[meeting_id], summary, judge=judge, kit=kit)
                scores = MetricScores(scores.completeness, scores.conciseness, faith)
        except EvalError as exc:
            logger.warning("baseline %s/%s failed: %s", meeting_id, model_id, exc)
            failures[model_id] = failures.get(model_id, 0) + 1
            continue
        scored[model_id].append(scores)

    rows = []
    for model_id in sorted(scored):
        items = scored[model_id]

        def mean(attr: str) -> float | None:
            vals = [getattr(s, attr) for s in items]
            if not vals or any(v is None for v in vals):
                return None
            return sum(vals) / len(vals)

        rows.append(
            BaselineRow(
                model_id=model_id,
                completeness=mean("completeness"),
                conciseness=mean("conciseness"),
                faithfulness=mean("faithfulness") if with_faithfulness else None,
                meetings=len(items),
                failed=failures.get(model_id, 0),
            )
        )
    return rows
