"""Pairwise matches: shared key facts, per-side alignment, win/draw/loss."""

from __future__ import annotations

import enum
import itertools
import logging
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from . import metrics
from .core import AlignmentEntry, AlignmentSet, KeyFact, KeyFactSet, MetricScores, SummaryDoc
from .errors import EvalError, SchedulingError
from .judge import Judge
from .parse import (
    ParseWarning,
    extract_json_payload,
    parse_alignment_response,
    parse_combined_response,
    parse_key_facts_response,
)
from .promptkit import PromptKit, default_kit

logger = logging.getLogger(__name__)

PARAGRAPH_SEPARATOR = "\n\n"
DEFAULT_EPSILON = 0.02
# Absorbs float error in score differences so a margin of exactly epsilon is a draw.
_MARGIN_SLACK = 1e-12
RANKED_METRICS = ("completeness", "conciseness")


class Mode(str, enum.Enum):
    SHARED_EXTRACTION = "shared_extraction"
    COMBINED_PROMPT = "combined_prompt"


class OrderPolicy(str, enum.Enum):
    BOTH_ORDERS = "both_orders"
    SEEDED_RANDOM = "seeded_random"


class Result(str, enum.Enum):
    WIN = "win"
    DRAW = "draw"
    LOSS = "loss"

    @property
    def score(self) -> float:
        return {"win": 1.0, "draw": 0.5, "loss": 0.0}[self.value]


@dataclass(frozen=True)
class Match:
    meeting_id: str
    model_a: str
    model_b: str


@dataclass(frozen=True)
class MatchPlan:
    matches: tuple[Match, ...]
    mode: Mode = Mode.SHARED_EXTRACTION
    order_policy: OrderPolicy = OrderPolicy.BOTH_ORDERS
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        seen = set()
        for m in self.matches:
            if m.model_a == m.model_b:
                raise SchedulingError(f"self-pair {m.model_a} in meeting {m.meeting_id}")
            key = (m.meeting_id, frozenset((m.model_a, m.model_b)))
            if key in seen:
                raise SchedulingError(f"pair {m.model_a}/{m.model_b} scheduled twice for {m.meeting_id}")
            seen.add(key)


def schedule_matches(
    models: Iterable[str],
    meetings: Iterable[str],
    summaries: Mapping[tuple[str, str], SummaryDoc] | None = None,
    *,
    mode: Mode | str = Mode.SHARED_EXTRACTION,
    order_policy: OrderPolicy | str = OrderPolicy.BOTH_ORDERS,
) -> MatchPlan:
    """Round robin over every unordered model pair for every meeting.

    When ``summaries`` (keyed by ``(meeting_id, model_id)``) is given, pairs
    lacking a summary for a meeting are skipped and reported in ``plan.warnings``.
    """
    models = sorted(set(models))
    meetings = sorted(set(meetings))
    if len(models) < 2:
        raise SchedulingError(f"need at least 2 models to schedule matches, got {len(models)}")
    if not meetings:
        raise SchedulingError("need at least 1 meeting to schedule matches")
    matches, warnings = [], []
    for meeting in meetings:
        for a, b in itertools.combinations(models, 2):
            if summaries is not None:
                absent = [m for m in (a, b) if (meeting, m) not in summaries]
                if absent:
                    warnings.append(f"skipped {meeting} {a} vs {b}: no summary from {', '.join(absent)}")
                    continue
            matches.append(Match(meeting, a, b))
    return MatchPlan(tuple(matches), Mode(mode), OrderPolicy(order_policy), tuple(warnings))


@dataclass(frozen=True)
class OrderRun:
    """One pass of the procedure with ``first`` concatenated before the other side."""

    first: str
    facts_a: KeyFactSet
    facts_b: KeyFactSet
    alignment_a: AlignmentSet
    alignment_b: AlignmentSet
    scores_a: MetricScores
    scores_b: MetricScores


@dataclass(frozen=True)
class ComparisonResult:
    meeting_id: str
    model_a: str
    model_b: str
    scores_a: MetricScores | None
    scores_b: MetricScores | None
    runs: tuple[OrderRun, ...] = ()
    warnings: tuple[dict[str, Any], ...] = ()
    valid: bool = True
    error: str | None = None

    @property
    def key_facts(self) -> KeyFactSet | None:
        return self.runs[0].facts_a if self.runs else None

    @property
    def alignments(self) -> tuple[AlignmentSet, AlignmentSet] | None:
        if not self.runs:
            return None
        return self.runs[0].alignment_a, self.runs[0].alignment_b

    def to_dict(self) -> dict[str, Any]:
        return {
            "meeting_id": self.meeting_id,
            "model_a": self.model_a,
            "model_b": self.model_b,
            "valid": self.valid,
            "error": self.error,
            "scores_a": _scores_dict(self.scores_a),
            "scores_b": _scores_dict(self.scores_b),
            "runs": [_run_dict(r) for r in self.runs],
            "warnings": [dict(w) for w in self.warnings],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ComparisonResult:
        return cls(
            meeting_id=data["meeting_id"],
            model_a=data["model_a"],
            model_b=data["model_b"],
            scores_a=_scores_from(data.get("scores_a")),
            scores_b=_scores_from(data.get("scores_b")),
            runs=tuple(_run_from(r) for r in data.get("runs", ())),
            warnings=tuple(data.get("warnings", ())),
            valid=bool(data.get("valid", True)),
            error=data.get("error"),
        )


def _scores_dict(scores: MetricScores | None) -> dict[str, Any] | None:
    if scores is None:
        return None
    return {"completeness": scores.completeness, "conciseness": scores.conciseness}


def _scores_from(data: Mapping[str, Any] | None) -> MetricScores | None:
    if data is None:
        return None
    return MetricScores(data["completeness"], data["conciseness"], data.get("faithfulness"))


def _facts_dict(facts: KeyFactSet) -> dict[str, Any]:
    return {
        "source": facts.source.value,
        "max_facts": facts.max_facts,
        "digest": facts.digest(),
        "facts": facts.texts,
    }


def _facts_from(data: Mapping[str, Any]) -> KeyFactSet:
    return KeyFactSet(
        tuple(KeyFact(t, i) for i, t in enumerate(data["facts"], start=1)),
        source=data["source"],
        max_facts=data.get("max_facts"),
    )


def _alignment_dict(alignment: AlignmentSet) -> dict[str, Any]:
    return {
        "summary_id": alignment.target_summary_id,
        "entries": [
            {"fact": e.fact_ordinal, "supported": e.supported, "lines": sorted(e.line_numbers)}
            for e in alignment.entries
        ],
    }


def _alignment_from(data: Mapping[str, Any]) -> AlignmentSet:
    return AlignmentSet(
        tuple(AlignmentEntry(e["fact"], e["supported"], frozenset(e["lines"])) for e in data["entries"]),
        target_summary_id=data["summary_id"],
    )


def _run_dict(run: OrderRun) -> dict[str, Any]:
    shared = run.facts_a is run.facts_b or run.facts_a == run.facts_b
    out: dict[str, Any] = {"first": run.first}
    if shared:
        out["facts"] = _facts_dict(run.facts_a)
    else:
        out["facts_a"] = _facts_dict(run.facts_a)
        out["facts_b"] = _facts_dict(run.facts_b)
    out.update(
        alignment_a=_alignment_dict(run.alignment_a),
        alignment_b=_alignment_dict(run.alignment_b),
        scores_a=_scores_dict(run.scores_a),
        scores_b=_scores_dict(run.scores_b),
    )
    return out


def _run_from(data: Mapping[str, Any]) -> OrderRun:
    if "facts" in data:
        facts_a = facts_b = _facts_from(data["facts"])
    else:
        facts_a, facts_b = _facts_from(data["facts_a"]), _facts_from(data["facts_b"])
    return OrderRun(
        first=data["first"],
        facts_a=facts_a,
        facts_b=facts_b,
        alignment_a=_alignment_from(data["alignment_a"]),
        alignment_b=_alignment_from(data["alignment_b"]),
        scores_a=_scores_from(data["scores_a"]),
        scores_b=_scores_from(data["scores_b"]),
    )


def build_paragraph(first: SummaryDoc, second: SummaryDoc) -> str:
    """Concatenate two summaries as plain text, blank line between, no model names."""
    return first.text + PARAGRAPH_SEPARATOR + second.text


def _stamp(warnings: Iterable[ParseWarning], **context: str) -> list[dict[str, Any]]:
    return [{**context, **w.to_dict()} for w in warnings]


def _score(facts: KeyFactSet, summary: SummaryDoc, alignment: AlignmentSet) -> MetricScores:
    return MetricScores(
        completeness=metrics.completeness(facts, alignment),
        conciseness=metrics.conciseness(summary, alignment),
    )


def _shared_run(
    first: str, a: SummaryDoc, b: SummaryDoc, judge: Judge, kit: PromptKit, max_facts: int
) -> tuple[OrderRun, list[dict[str, Any]]]:
    paragraph = build_paragraph(a, b) if first == "a" else build_paragraph(b, a)
    facts, extraction_warnings = judge.ask(
        kit.render_extraction_prompt(paragraph, max_facts),
        lambda raw: parse_key_facts_response(extract_json_payload(raw), max_facts),
    )
    warnings = _stamp(extraction_warnings, first=first, stage="extraction")
    alignments = {}
    for side, summary in (("a", a), ("b", b)):
        alignment, align_warnings = judge.ask(
            kit.render_alignment_prompt(facts, summary),
            lambda raw, s=summary: parse_alignment_response(
                extract_json_payload(raw), facts, s.n, summary_id=s.summary_id
            ),
        )
        alignments[side] = alignment
        warnings += _stamp(align_warnings, first=first, stage="alignment", side=side)
    run = OrderRun(
        first=first,
        facts_a=facts,
        facts_b=facts,
        alignment_a=alignments["a"],
        alignment_b=alignments["b"],
        scores_a=_score(facts, a, alignments["a"]),
        scores_b=_score(facts, b, alignments["b"]),
    )
    return run, warnings


def _combined_run(
    first: str, a: SummaryDoc, b: SummaryDoc, judge: Judge, kit: PromptKit, max_facts: int
) -> tuple[OrderRun, list[dict[str, Any]]]:
    paragraph = build_paragraph(a, b) if first == "a" else build_paragraph(b, a)
    parsed = {}
    warnings: list[dict[str, Any]] = []
    for side, summary in (("a", a), ("b", b)):
        facts, alignment, side_warnings = judge.ask(
            kit.render_combined_prompt(paragraph, summary, max_facts),
            lambda raw, s=summary: parse_combined_response(
                extract_json_payload(raw), s.n, max_facts, summary_id=s.summary_id
            ),
        )
        parsed[side] = (facts, alignment)
        warnings += _stamp(side_warnings, first=first, stage="combined", side=side)
    (facts_a, alignment_a), (facts_b, alignment_b) = parsed["a"], parsed["b"]
    run = OrderRun(
        first=first,
        facts_a=facts_a,
        facts_b=facts_b,
        alignment_a=alignment_a,
        alignment_b=alignment_b,
        scores_a=_score(facts_a, a, alignment_a),
        scores_b=_score(facts_b, b, alignment_b),
    )
    return run, warnings


def _orders(policy: OrderPolicy, seed: int, a: SummaryDoc, b: SummaryDoc) -> list[str]:
    if policy is OrderPolicy.BOTH_ORDERS:
        return ["a", "b"]
    # Seeded on the unordered pair so swapping labels picks the same physical order.
    low, high = sorted((a.model_id, b.model_id))
    rng = random.Random(f"{seed}|{a.meeting_id}|{low}|{high}")
    lead = rng.choice((low, high))
    return ["a" if lead == a.model_id else "b"]


def _mean(values: list[float]) -> float:
    return sum(values) / len(values)


def run_match(
    meeting_id: str,
    summary_a: SummaryDoc,
    summary_b: SummaryDoc,
    *,
    judge: Judge,
    mode: Mode | str = Mode.SHARED_EXTRACTION,
    max_facts: int = 16,
    order_policy: OrderPolicy | str = OrderPolicy.BOTH_ORDERS,
    seed: int = 0,
    kit: PromptKit | None = None,
) -> ComparisonResult:
    """Compare two summaries of one meeting.

    Judge or parse failures that survive the single re-ask yield a result
    with ``valid=False``; such results are excluded from ratings.
    """
    for s in (summary_a, summary_b):
        if s.meeting_id != meeting_id:
            raise ValueError(f"summary {s.summary_id} does not belong to meeting {meeting_id}")
    mode, order_policy = Mode(mode), OrderPolicy(order_policy)
    kit = kit or default_kit()
    procedure = _shared_run if mode is Mode.SHARED_EXTRACTION else _combined_run

    runs, warnings = [], []
    try:
        for first in _orders(order_policy, seed, summary_a, summary_b):
            run, run_warnings = procedure(first, summary_a, summary_b, judge, kit, max_facts)
            runs.append(run)
            warnings += run_warnings
    except EvalError as exc:
        logger.warning("match %s %s vs %s invalid: %s", meeting_id, summary_a.model_id, summary_b.model_id, exc)
        return ComparisonResult(
            meeting_id, summary_a.model_id, summary_b.model_id, None, None,
            warnings=tuple(warnings), valid=False, error=f"{type(exc).__name__}: {exc}",
        )

    def averaged(side: str) -> MetricScores:
        picked = [r.scores_a if side == "a" else r.scores_b for r in runs]
        return MetricScores(
            completeness=_mean([s.completeness for s in picked]),
            conciseness=_mean([s.conciseness for s in picked]),
        )

    return ComparisonResult(
        meeting_id,
        summary_a.model_id,
        summary_b.model_id,
        averaged("a"),
        averaged("b"),
        runs=tuple(runs),
        warnings=tuple(warnings),
    )


def run_tournament(
    plan: MatchPlan,
    summaries: Mapping[tuple[str, str], SummaryDoc],
    *,
    judge: Judge,
    max_facts: int = 16,
    seed: int = 0,
    kit: PromptKit | None = None,
    concurrency: int = 4,
) -> list[ComparisonResult]:
    """Run every planned match; results come back sorted by (meeting, model_a, model_b)."""

    def play(match: Match) -> ComparisonResult:
        return run_match(
            match.meeting_id,
            summaries[(match.meeting_id, match.model_a)],
            summaries[(match.meeting_id, match.model_b)],
            judge=judge,
            mode=plan.mode,
            max_facts=max_facts,
            order_policy=plan.order_policy,
            seed=seed,
            kit=kit,
        )

    if concurrency <= 1:
        results = [play(m) for m in plan.matches]
    else:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            results = list(pool.map(play, plan.matches))
    return sorted(results, key=lambda r: (r.meeting_id, r.model_a, r.model_b))


@dataclass(frozen=True)
class MatchOutcome:
    meeting_id: str
    model_a: str
    model_b: str
    metric: str
    result_for_a: Result
    margin: float
    valid: bool = field(default=True, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "result_for_a", Result(self.result_for_a))

    @property
    def score_a(self) -> float:
        return self.result_for_a.score


def decide_outcome(result: ComparisonResult, metric: str, epsilon: float = DEFAULT_EPSILON) -> MatchOutcome:
    """Win/draw/loss for side A on ``metric``; margins within ``epsilon`` are draws."""
    if metric not in RANKED_METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    if not result.valid or result.scores_a is None or result.scores_b is None:
        raise ValueError(f"match {result.meeting_id} {result.model_a} vs {result.model_b} has no scores")
    margin = result.scores_a.get(metric) - result.scores_b.get(metric)
    if abs(margin) <= epsilon + _MARGIN_SLACK:
        outcome = Result.DRAW
    elif margin > 0:
        outcome = Result.WIN
    else:
        outcome = Result.LOSS
    return MatchOutcome(result.meeting_id, result.model_a, result.model_b, metric, outcome, margin)


def outcomes_for(
    results: Iterable[ComparisonResult],
    epsilon: float = DEFAULT_EPSILON,
    metrics_: Iterable[str] = RANKED_METRICS,
) -> list[MatchOutcome]:
    """Outcomes for every valid result on every ranked metric."""
    metric_names = list(metrics_)
    return [decide_outcome(r, m, epsilon) for r in results if r.valid for m in metric_names]
