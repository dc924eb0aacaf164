"""Deterministic rendering of judge prompts.

Templates are plain-text assets with ``{{placeholder}}`` markers. The
packaged defaults live in ``summarena/templates``; a directory passed as
``template_dir`` overrides any file it contains, by name.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .core import KeyFactSet, SummaryDoc, Transcript
from .errors import PromptRenderError

DEFAULT_TRANSCRIPT_CHAR_BUDGET = 60_000
MAX_FACTS_RANGE = range(1, 101)

# Section headers the inputs are placed under; the mock judge reads them back.
PARAGRAPH_HEADER = "Paragraph:\n"
SUMMARY_HEADER = "Summary:\n"
KEY_FACTS_HEADER = "Key facts:\n"
TRANSCRIPT_HEADER = "Transcript:\n"
COMBINED_ALIGNMENT_INTRO = "\n\nYou now have a summary and a set of key facts"

REASK_MARKER = "\n\n### Previous answer rejected"

_PLACEHOLDER = re.compile(r"\{\{\s*(\w+)\s*\}\}")

_NUMBER_WORDS = (
    "zero one two three four five six seven eight nine ten eleven twelve "
    "thirteen fourteen fifteen sixteen seventeen eighteen nineteen twenty"
).split()


class TemplateId(str, enum.Enum):
    COMBINED = "combined"
    EXTRACTION_ONLY = "extraction_only"
    ALIGNMENT_ONLY = "alignment_only"
    FAITHFULNESS = "faithfulness"


@dataclass(frozen=True)
class PromptTemplate:
    template_id: TemplateId
    body: str

    @property
    def placeholders(self) -> set[str]:
        return set(_PLACEHOLDER.findall(self.body))

    def render(self, **bindings: object) -> str:
        """Substitute every placeholder; values are inserted verbatim, never re-scanned."""
        missing = self.placeholders - bindings.keys()
        if missing:
            raise PromptRenderError(
                f"template {self.template_id.value} has unbound placeholders: {sorted(missing)}"
            )
        return _PLACEHOLDER.sub(lambda m: str(bindings[m.group(1)]), self.body)


def _read_asset(name: str, template_dir: Path | None) -> str:
    if template_dir is not None:
        candidate = Path(template_dir) / name
        if candidate.is_file():
            return candidate.read_text(encoding="utf-8")
    return resources.files("summarena").joinpath("templates", name).read_text(encoding="utf-8")


def load_template(template_id: TemplateId | str, template_dir: Path | None = None) -> PromptTemplate:
    template_id = TemplateId(template_id)
    return PromptTemplate(template_id, _read_asset(f"{template_id.value}.txt", template_dir))


def load_example_facts(path: Path | None = None) -> tuple[str, ...]:
    if path is None:
        text = _read_asset("example_facts.txt", None)
    else:
        text = Path(path).read_text(encoding="utf-8")
    return tuple(line.strip() for line in text.splitlines() if line.strip())


def _count_word(n: int) -> str:
    return _NUMBER_WORDS[n] if n < len(_NUMBER_WORDS) else str(n)


def _check_max_facts(max_facts: int) -> None:
    if max_facts not in MAX_FACTS_RANGE:
        raise PromptRenderError(f"max_facts must be in 1..100, got {max_facts}")


class PromptKit:
    """Holds the loaded templates and render options.

    Args:
        template_dir: optional directory whose files override the packaged templates.
        example_facts_path: optional file with one illustrative key fact per line.
        reproduce_ket_typo: reproduce the original template's "ket facts" spelling
            in the combined prompt.
        transcript_char_budget: rendered transcripts longer than this are rejected.
    """

    def __init__(
        self,
        template_dir: Path | None = None,
        example_facts_path: Path | None = None,
        *,
        reproduce_ket_typo: bool = False,
        transcript_char_budget: int = DEFAULT_TRANSCRIPT_CHAR_BUDGET,
    ):
        self.templates = {tid: load_template(tid, template_dir) for tid in TemplateId}
        self.example_facts = load_example_facts(example_facts_path)
        self.reproduce_ket_typo = reproduce_ket_typo
        self.transcript_char_budget = transcript_char_budget

    def _example_bindings(self) -> dict[str, str]:
        return {
            "example_count": _count_word(len(self.example_facts)),
            "example_facts": "\n".join(f"* {fact}" for fact in self.example_facts),
        }

    def render_combined_prompt(
        self, paragraph: str, candidate_summary: SummaryDoc, max_facts: int
    ) -> str:
        if not paragraph.strip():
            raise PromptRenderError("paragraph must be non-empty")
        _check_max_facts(max_facts)
        text = self.templates[TemplateId.COMBINED].render(
            paragraph=paragraph,
            summary=candidate_summary.numbered(),
            max_facts=max_facts,
            **self._example_bindings(),
        )
        if self.reproduce_ket_typo:
            text = text.replace(
                f"(at most {max_facts}) key facts. ", f"(at most {max_facts}) ket facts. ", 1
            )
        return text

    def render_extraction_prompt(self, paragraph: str, max_facts: int) -> str:
        if not paragraph.strip():
            raise PromptRenderError("paragraph must be non-empty")
        _check_max_facts(max_facts)
        return self.templates[TemplateId.EXTRACTION_ONLY].render(
            paragraph=paragraph, max_facts=max_facts, **self._example_bindings()
        )

    def render_alignment_prompt(self, facts: KeyFactSet, candidate_summary: SummaryDoc) -> str:
        if len(facts) == 0:
            raise PromptRenderError("cannot render an alignment prompt without key facts")
        block = "\n".join(f"{f.ordinal}. {f.text}" for f in facts)
        return self.templates[TemplateId.ALIGNMENT_ONLY].render(
            key_facts=block, summary=candidate_summary.numbered()
        )

    def render_faithfulness_prompt(self, transcript: Transcript, candidate_summary: SummaryDoc) -> str:
        rendered = self.render_transcript(transcript)
        return self.templates[TemplateId.FAITHFULNESS].render(
            transcript=rendered,
            summary=candidate_summary.numbered(),
            num_sentences=candidate_summary.n,
        )

    def render_transcript(self, transcript: Transcript) -> str:
        rendered = transcript.render()
        if len(rendered) > self.transcript_char_budget:
            raise PromptRenderError(
                f"transcript {transcript.meeting_id!r} renders to {len(rendered)} characters, "
                f"over the budget of {self.transcript_char_budget}"
            )
        return rendered


def reask_suffix(reason: str) -> str:
    """Appended to a prompt when the previous answer failed validation."""
    return (
        f"{REASK_MARKER}\nYour previous answer could not be used: {reason}\n"
        "Answer again with only the JSON described above.\n"
    )


_default_kit: PromptKit | None = None


def default_kit() -> PromptKit:
    global _default_kit
    if _default_kit is None:
        _default_kit = PromptKit()
    return _default_kit


def render_combined_prompt(paragraph: str, candidate_summary: SummaryDoc, max_facts: int) -> str:
    return default_kit().render_combined_prompt(paragraph, candidate_summary, max_facts)


def render_extraction_prompt(paragraph: str, max_facts: int) -> str:
    return default_kit().render_extraction_prompt(paragraph, max_facts)


def render_alignment_prompt(facts: KeyFactSet, candidate_summary: SummaryDoc) -> str:
    return default_kit().render_alignment_prompt(facts, candidate_summary)


def render_faithfulness_prompt(transcript: Transcript, candidate_summary: SummaryDoc) -> str:
    return default_kit().render_faithfulness_prompt(transcript, candidate_summary)
