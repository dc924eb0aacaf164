"""Leaderboard and pairwise-score reports in JSON, CSV and Markdown."""

from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from typing import Any, Iterable, Mapping

from .baseline import BaselineRow
from .elo import LeaderboardRow
from .tournament import ComparisonResult


def pairwise_matrix(results: Iterable[ComparisonResult], metric: str) -> dict[str, dict[str, float]]:
    """Mean score per ordered pair, laid out as ``matrix[row][col]``.

    A cell holds the score the column model earned when compared with the
    row model, averaged over meetings. Diagonal cells are absent.
    """
    sums: dict[tuple[str, str], list[float]] = defaultdict(list)
    for r in results:
        if not r.valid:
            continue
        sums[(r.model_a, r.model_b)].append(r.scores_b.get(metric))
        sums[(r.model_b, r.model_a)].append(r.scores_a.get(metric))
    matrix: dict[str, dict[str, float]] = {}
    for (row, col), values in sorted(sums.items()):
        matrix.setdefault(row, {})[col] = sum(values) / len(values)
    return matrix


def _fmt_rating(x: float) -> str:
    return f"{x:.2f}"


def _ordinal(rank: int) -> str:
    suffix = "th" if 10 <= rank % 100 <= 20 else {1: "st", 2: "nd", 3: "rd"}.get(rank % 10, "th")
    return f"{rank}{suffix}"


def leaderboard_csv(rows: list[LeaderboardRow], header_comment: str = "") -> str:
    buf = io.StringIO()
    if header_comment:
        for line in header_comment.splitlines():
            buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rank", "model_id", "rating", "spread", "matches"])
    for row in rows:
        writer.writerow([row.rank, row.model_id, _fmt_rating(row.rating), _fmt_rating(row.spread), row.matches])
    return buf.getvalue()


def leaderboard_markdown(
    boards: Mapping[str, list[LeaderboardRow]],
    matrices: Mapping[str, Mapping[str, Mapping[str, float]]],
    run_info: Mapping[str, Any],
) -> str:
    lines = ["# Leaderboard", ""]
    for metric, rows in boards.items():
        lines += [f"## {metric.capitalize()}", ""]
        lines += ["| Rank | Model | Rating | Spread | Matches |", "|---|---|---:|---:|---:|"]
        for row in rows:
            lines.append(
                f"| {_ordinal(row.rank)} | {row.model_id} | {_fmt_rating(row.rating)} "
                f"| {_fmt_rating(row.spread)} | {row.matches} |"
            )
        lines.append("")

    models = sorted(
        {row for mat in matrices.values() for row in mat}
        | {col for mat in matrices.values() for cols in mat.values() for col in cols}
    )
    lines += ["## Pairwise scores", ""]
    lines.append("Cell (row, column): mean score of the column model when compared with the row model.")
    lines.append("")
    for metric, matrix in matrices.items():
        lines += [f"### {metric.capitalize()}", ""]
        lines.append("| VS | " + " | ".join(models) + " |")
        lines.append("|---|" + "---:|" * len(models))
        for row in models:
            cells = []
            for col in models:
                value = matrix.get(row, {}).get(col)
                cells.append("-" if value is None else f"{100 * value:.1f}%")
            lines.append(f"| {row} | " + " | ".join(cells) + " |")
        lines.append("")

    lines += ["## Run", "", "```json", json.dumps(run_info, sort_keys=True, indent=2), "```", ""]
    return "\n".join(lines)


def baseline_csv(rows: list[BaselineRow], header_comment: str = "") -> str:
    buf = io.StringIO()
    if header_comment:
        for line in header_comment.splitlines():
            buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model_id", "completeness", "conciseness", "faithfulness", "meetings", "failed"])

    def cell(x):
        return "" if x is None else f"{x:.4f}"

    for row in rows:
        writer.writerow(
            [row.model_id, cell(row.completeness), cell(row.conciseness), cell(row.faithfulness), row.meetings, row.failed]
        )
    return buf.getvalue()
