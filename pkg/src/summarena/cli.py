"""Command-line entry point.

Exit codes: 0 success, 2 input or configuration error, 3 no valid matches to rank.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path
from typing import Any, Sequence

from . import dataio, report
from .baseline import run_baseline
from .config import Config, build_judge, build_kit
from .core import FactSource
from .elo import EloConfig, leaderboard, rate_all
from .errors import InputError, JudgeConfigError, PromptRenderError, RatingError, SchedulingError
from .judge import atomic_write_text
from .tournament import RANKED_METRICS, ComparisonResult, outcomes_for, run_tournament, schedule_matches

logger = logging.getLogger("summarena")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_EMPTY = 3


def _config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("config overrides")
    for f in fields(Config):
        flag = "--" + f.name.replace("_", "-")
        kind = type(f.default)
        if kind is bool:
            group.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction, default=None)
        else:
            group.add_argument(flag, dest=f.name, type=kind, default=None, metavar=f.name.upper())


def _resolve_config(args: argparse.Namespace, base: Config | None = None) -> Config:
    config = Config.load(args.config) if args.config else (base or Config())
    overrides = {f.name: getattr(args, f.name, None) for f in fields(Config)}
    return config.override(**overrides)


def _run_info(config: Config) -> dict[str, Any]:
    return {"config": config.to_dict(), "seed": config.seed}


def cmd_compare(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    meetings = dataio.load_meetings(args.meetings)
    summaries = dataio.load_summaries(args.summaries, max_lines=config.max_summary_lines)
    systems, _ = dataio.split_gold(summaries, config.human_model_id)
    models = sorted({model for _, model in systems})
    plan = schedule_matches(models, meetings, systems, mode=config.mode, order_policy=config.order_policy)
    judge = build_judge(config)
    results = run_tournament(
        plan,
        systems,
        judge=judge,
        max_facts=config.max_key_facts,
        seed=config.seed,
        kit=build_kit(config),
        concurrency=config.concurrency,
    )
    run = _run_info(config)
    atomic_write_text(args.out, dataio.dumps_jsonl({**r.to_dict(), "run": run} for r in results))

    invalid = sum(1 for r in results if not r.valid)
    for warning in plan.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    if invalid:
        print(f"warning: {invalid} of {len(results)} matches invalid (excluded from ratings)", file=sys.stderr)
    print(
        f"wrote {len(results)} results to {args.out} "
        f"({judge.backend_calls} judge calls, {len(plan.warnings)} skipped)",
        file=sys.stderr,
    )
    return EXIT_OK


def load_results(path: str | Path) -> tuple[list[ComparisonResult], dict[str, Any] | None]:
    results, run = [], None
    for i, record in enumerate(dataio.read_jsonl(path), start=1):
        run = run or record.get("run")
        try:
            results.append(ComparisonResult.from_dict(record))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{path} record {i}: not a comparison result ({exc})") from exc
    return results, run


def cmd_rank(args: argparse.Namespace) -> int:
    results, run = load_results(args.results)
    if not results:
        raise InputError(f"{args.results} contains no results")
    base = Config.from_mapping(run["config"]) if run and "config" in run else None
    config = _resolve_config(args, base)
    outcomes = outcomes_for(results, epsilon=config.epsilon)
    if not outcomes:
        print(f"error: no valid matches in {args.results}", file=sys.stderr)
        return EXIT_EMPTY
    elo_config = EloConfig(config.k_factor, config.initial_rating, config.permutations, config.seed)
    table = rate_all(outcomes, elo_config)
    boards = {m: leaderboard(table, m, ties=config.tie_policy) for m in RANKED_METRICS if m in table.ratings}
    matrices = {m: report.pairwise_matrix(results, m) for m in boards}
    info = _run_info(config)
    valid = sum(1 for r in results if r.valid)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "run": info,
        "matches": {"valid": valid, "invalid": len(results) - valid},
        "leaderboards": {
            m: [
                {"rank": r.rank, "model_id": r.model_id, "rating": r.rating, "spread": r.spread, "matches": r.matches}
                for r in rows
            ]
            for m, rows in boards.items()
        },
        "pairwise": matrices,
    }
    atomic_write_text(out / "leaderboard.json", json.dumps(payload, sort_keys=True, indent=2) + "\n")
    comment = "run: " + json.dumps(info, sort_keys=True)
    for metric, rows in boards.items():
        atomic_write_text(out / f"leaderboard_{metric}.csv", report.leaderboard_csv(rows, comment))
    atomic_write_text(out / "leaderboard.md", report.leaderboard_markdown(boards, matrices, info))

    for metric, rows in boards.items():
        print(metric, " > ".join(f"{r.model_id}({r.rank})" for r in rows))
    return EXIT_OK


def cmd_baseline(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    kind = FactSource(args.reference)
    meetings = dataio.load_meetings(args.meetings) if args.meetings else {}
    summaries = dataio.load_summaries(args.summaries, max_lines=config.max_summary_lines)
    systems, gold = dataio.split_gold(summaries, config.human_model_id)
    if not systems:
        raise InputError(f"{args.summaries} has no system summaries to score")
    rows = run_baseline(
        systems,
        kind,
        judge=build_judge(config),
        max_facts=config.max_key_facts,
        meetings=meetings,
        gold=gold,
        with_faithfulness=args.faithfulness,
        kit=build_kit(config),
    )
    info = {**_run_info(config), "reference": kind.value, "max_key_facts": config.max_key_facts}
    out = Path(args.out)
    payload = {"run": info, "rows": [r.to_dict() for r in rows]}
    atomic_write_text(out, json.dumps(payload, sort_keys=True, indent=2) + "\n")
    atomic_write_text(out.with_suffix(".csv"), report.baseline_csv(rows, "run: " + json.dumps(info, sort_keys=True)))
    for row in rows:
        print(f"{row.model_id}: completeness={row.completeness} conciseness={row.conciseness}")
    return EXIT_OK


def cmd_ingest_qmsum(args: argparse.Namespace) -> int:
    inputs = []
    for p in args.inputs:
        path = Path(p)
        inputs += sorted(path.glob("*.json*")) if path.is_dir() else [path]
    meeting_rows, summary_rows = dataio.ingest_qmsum(inputs, human_model_id=args.human_model_id)
    atomic_write_text(args.meetings_out, dataio.dumps_jsonl(meeting_rows))
    atomic_write_text(args.summaries_out, dataio.dumps_jsonl(summary_rows))
    print(f"converted {len(meeting_rows)} meetings, {len(summary_rows)} gold summaries", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="summarena", description="Pairwise key-fact evaluation of meeting summaries")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compare", help="run pairwise matches and write results JSONL")
    p.add_argument("--config")
    p.add_argument("--meetings", required=True)
    p.add_argument("--summaries", required=True)
    p.add_argument("--out", required=True)
    _config_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("rank", help="Elo-rank a results file")
    p.add_argument("--results", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True, help="output directory")
    _config_flags(p)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("baseline", help="reference-based absolute scores per model")
    p.add_argument("--config")
    p.add_argument("--meetings")
    p.add_argument("--summaries", required=True)
    p.add_argument("--reference", required=True, choices=[k.value for k in FactSource if k is not FactSource.CONCATENATED_PAIR])
    p.add_argument("--faithfulness", action="store_true", help="also score faithfulness against transcripts")
    p.add_argument("--out", required=True, help="output JSON path; a CSV is written alongside")
    _config_flags(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("ingest-qmsum", help="convert QMSum meeting files to meetings/summaries JSONL")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--meetings-out", required=True)
    p.add_argument("--summaries-out", required=True)
    p.add_argument("--human-model-id", default="human")
    p.set_defaults(func=cmd_ingest_qmsum)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, JudgeConfigError, PromptRenderError, SchedulingError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RatingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY


if __name__ == "__main__":
    sys.exit(main())
