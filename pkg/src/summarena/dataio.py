"""Dataset ingestion (JSONL meetings and summaries) and QMSum conversion."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable, Iterator

from .core import DEFAULT_MAX_SUMMARY_LINES, SummaryDoc, Transcript, Turn
from .errors import InputError


def read_jsonl(path: str | Path) -> Iterator[dict[str, Any]]:
    path = Path(path)
    try:
        handle = path.open(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc}") from exc
    with handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise InputError(f"{path}:{lineno}: expected a JSON object")
            yield record


def dumps_jsonl(records: Iterable[dict[str, Any]]) -> str:
    return "".join(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n" for r in records)


def _field(record: dict, key: str, where: str):
    if key not in record:
        raise InputError(f"{where}: missing field {key!r}")
    return record[key]


def load_meetings(path: str | Path) -> dict[str, Transcript]:
    meetings: dict[str, Transcript] = {}
    for i, record in enumerate(read_jsonl(path), start=1):
        where = f"{path} record {i}"
        meeting_id = str(_field(record, "meeting_id", where))
        turns = _field(record, "turns", where)
        if not isinstance(turns, list):
            raise InputError(f"{where}: turns must be a list")
        try:
            transcript = Transcript(
                meeting_id,
                tuple(Turn(str(t.get("speaker", "")), str(_field(t, "text", where))) for t in turns),
            )
        except AttributeError as exc:
            raise InputError(f"{where}: each turn must be an object") from exc
        except InputError as exc:
            raise InputError(f"{where}: {exc}") from exc
        if meeting_id in meetings:
            raise InputError(f"{where}: duplicate meeting {meeting_id!r}")
        meetings[meeting_id] = transcript
    return meetings


def load_summaries(
    path: str | Path, max_lines: int = DEFAULT_MAX_SUMMARY_LINES
) -> dict[tuple[str, str], SummaryDoc]:
    """Summaries keyed by ``(meeting_id, model_id)``."""
    summaries: dict[tuple[str, str], SummaryDoc] = {}
    for i, record in enumerate(read_jsonl(path), start=1):
        where = f"{path} record {i}"
        meeting_id = str(_field(record, "meeting_id", where))
        model_id = str(_field(record, "model_id", where))
        text = _field(record, "text", where)
        if not isinstance(text, str):
            raise InputError(f"{where}: text must be a string")
        key = (meeting_id, model_id)
        if key in summaries:
            raise InputError(f"{where}: duplicate summary for {meeting_id}/{model_id}")
        summaries[key] = SummaryDoc.from_text(meeting_id, model_id, text, max_lines=max_lines)
    return summaries


def split_gold(
    summaries: dict[tuple[str, str], SummaryDoc], human_model_id: str
) -> tuple[dict[tuple[str, str], SummaryDoc], dict[str, SummaryDoc]]:
    """Separate human reference summaries from the systems under evaluation."""
    systems = {k: v for k, v in summaries.items() if k[1] != human_model_id}
    gold = {k[0]: v for k, v in summaries.items() if k[1] == human_model_id}
    return systems, gold


def convert_qmsum(record: dict[str, Any], meeting_id: str, human_model_id: str = "human"):
    """Turn one QMSum meeting record into a meetings row and a gold summary row.

    The transcript comes from ``meeting_transcripts`` and the gold summary is
    the answer to the first general query. Returns ``(meeting_row, summary_row)``
    where ``summary_row`` is ``None`` if the record has no general query.
    """
    raw_turns = record.get("meeting_transcripts")
    if not raw_turns:
        raise InputError(f"QMSum record {meeting_id} has no meeting_transcripts")
    turns = [
        {"speaker": str(t.get("speaker", "")), "text": str(t.get("content", "")).strip()}
        for t in raw_turns
        if str(t.get("content", "")).strip()
    ]
    meeting_row = {"meeting_id": meeting_id, "turns": turns}
    queries = record.get("general_query_list") or []
    summary_row = None
    if queries and queries[0].get("answer"):
        summary_row = {"meeting_id": meeting_id, "model_id": human_model_id, "text": queries[0]["answer"]}
    return meeting_row, summary_row


def ingest_qmsum(paths: Iterable[str | Path], human_model_id: str = "human"):
    """Convert QMSum JSON files (one meeting per file, or JSONL of meetings)."""
    meeting_rows, summary_rows = [], []
    for path in sorted(Path(p) for p in paths):
        text = path.read_text(encoding="utf-8")
        try:
            records = [json.loads(text)]
        except json.JSONDecodeError:
            records = list(read_jsonl(path))
        for i, record in enumerate(records):
            meeting_id = path.stem if len(records) == 1 else f"{path.stem}-{i}"
            meeting_row, summary_row = convert_qmsum(record, meeting_id, human_model_id)
            meeting_rows.append(meeting_row)
            if summary_row is not None:
                summary_rows.append(summary_row)
    return meeting_rows, summary_rows
