from __future__ import annotations

import json
from pathlib import Path

import pytest

from summarena import Judge, MockBackend, SummaryDoc

FIXTURES = Path(__file__).parent / "fixtures"

NOUNS = (
    "budget roadmap hiring launch vendor pricing security backlog design "
    "survey audit contract server training office travel"
).split()
VERBS = "approved delayed reviewed doubled cancelled drafted expanded audited".split()


def tradeoff_lines(meeting: int) -> dict[str, list[str]]:
    """Sentences for the three-model tradeoff corpus.

    B states eight facts. A states the same eight wrapped in four filler
    sentences (two before, two after). C states only B's first three.
    """
    facts = [
        f"The {NOUNS[(meeting + i) % len(NOUNS)]} team {VERBS[(meeting + i) % len(VERBS)]} item{meeting}x{i} quickly."
        for i in range(8)
    ]
    filler = [f"Participants chatted about weather{meeting}w{j} and snacks{meeting}s{j}." for j in range(4)]
    return {"A": filler[:2] + facts + filler[2:], "B": facts, "C": facts[:3]}


def tradeoff_corpus(meetings: int = 5) -> dict[tuple[str, str], SummaryDoc]:
    corpus = {}
    for m in range(meetings):
        meeting_id = f"m{m}"
        for model, lines in tradeoff_lines(m).items():
            corpus[(meeting_id, model)] = SummaryDoc.from_text(meeting_id, model, " ".join(lines))
    return corpus


def write_corpus_files(directory: Path, meetings: int = 5, drop: tuple[str, str] | None = None) -> tuple[Path, Path]:
    """Write meetings.jsonl and summaries.jsonl for the tradeoff corpus."""
    meetings_path = directory / "meetings.jsonl"
    summaries_path = directory / "summaries.jsonl"
    with meetings_path.open("w") as fh:
        for m in range(meetings):
            lines = tradeoff_lines(m)["A"]
            turns = [{"speaker": f"S{i % 3}", "text": line} for i, line in enumerate(lines)]
            fh.write(json.dumps({"meeting_id": f"m{m}", "turns": turns}) + "\n")
    with summaries_path.open("w") as fh:
        for m in range(meetings):
            for model, lines in tradeoff_lines(m).items():
                if drop == (f"m{m}", model):
                    continue
                fh.write(json.dumps({"meeting_id": f"m{m}", "model_id": model, "text": " ".join(lines)}) + "\n")
    return meetings_path, summaries_path


@pytest.fixture
def mock_judge() -> Judge:
    return Judge(MockBackend())


@pytest.fixture
def corpus() -> dict[tuple[str, str], SummaryDoc]:
    return tradeoff_corpus()
