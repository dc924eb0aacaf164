"""Completeness, conciseness and faithfulness scores."""

from __future__ import annotations

from .core import AlignmentSet, FaithfulnessLabels, KeyFactSet, SummaryDoc
from .errors import MetricError


def completeness(facts: KeyFactSet, alignment: AlignmentSet) -> float:
    """Fraction of key facts the summary supports."""
    if len(facts) == 0:
        raise MetricError("completeness is undefined for an empty key-fact set")
    if len(alignment) != len(facts):
        raise MetricError(
            f"alignment has {len(alignment)} entries but there are {len(facts)} key facts"
        )
    supported = sum(1 for entry in alignment.entries if entry.supported)
    return supported / len(facts)


def conciseness(summary: SummaryDoc, alignment: AlignmentSet) -> float:
    """Fraction of summary lines cited by at least one key fact.

    Lines are counted once no matter how many facts cite them.
    """
    n = summary.n
    if n == 0:
        raise MetricError("conciseness is undefined for an empty summary")
    cited = alignment.cited_lines()
    if cited and max(cited) > n:
        raise MetricError(f"alignment cites line {max(cited)} of a {n}-line summary")
    return len(cited) / n


def faithfulness(labels: FaithfulnessLabels) -> float:
    if len(labels) == 0:
        raise MetricError("faithfulness is undefined without sentence labels")
    return sum(labels.labels) / len(labels)
