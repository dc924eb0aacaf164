"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see only these lines, or
plain ``pytest`` where they appear alongside the normal report.
"""

import itertools
import json
import random
import time
from contextlib import contextmanager
from fractions import Fraction

import mpmath
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import FIXTURES, tradeoff_corpus, write_corpus_files
from summarena import Judge, MockBackend
from summarena.baseline import ReferenceSource, extract_reference_key_facts, score_summary_absolute
from summarena.cli import main
from summarena.core import AlignmentEntry, AlignmentSet, FactSource, FaithfulnessLabels, KeyFactSet, SummaryDoc
from summarena.elo import (
    EloConfig,
    ModelRating,
    RatingTable,
    apply_update,
    expected_score,
    leaderboard,
    rate_all,
    replay,
)
from summarena.errors import ValidationError
from summarena.metrics import completeness, conciseness, faithfulness
from summarena.parse import extract_json_payload, parse_alignment_response
from summarena.promptkit import PromptKit, load_example_facts
from summarena.tournament import MatchOutcome, Result, outcomes_for, run_tournament, schedule_matches


@contextmanager
def criterion(capsys, label):
    detail = {}
    try:
        yield detail
    except BaseException as exc:
        with capsys.disabled():
            print(f"\nFAIL  {label}: {detail.get('info') or type(exc).__name__ + ': ' + str(exc)[:200]}")
        raise
    with capsys.disabled():
        print(f"\nPASS  {label}" + (f": {detail['info']}" if "info" in detail else ""))


# -- 1 ------------------------------------------------------------------------


def _facts(n):
    return KeyFactSet.build([f"fact {i}" for i in range(n)])


def _summary(n):
    return SummaryDoc("s", "m", "x", tuple(f"line {i}." for i in range(n)))


def _alignment(n_facts, supported, lines):
    return AlignmentSet(
        tuple(
            AlignmentEntry(i, i in supported, frozenset(lines.get(i, ())) if i in supported else frozenset())
            for i in range(1, n_facts + 1)
        )
    )


def metric_fixtures():
    """(label, computed, exact Fraction) triples; the Fractions are worked out independently by set counting."""
    cases = []
    comp = [(16, range(1, 10)), (4, range(1, 5)), (4, ()), (3, (2,)), (30, range(1, 21)), (7, (1, 3, 5))]
    for n, sup in comp:
        sup = set(sup)
        cases.append((f"completeness {len(sup)}/{n}", completeness(_facts(n), _alignment(n, sup, {})), Fraction(len(sup), n)))
    conc = [
        (10, {1: {1, 2, 3}, 2: {7, 8}, 3: {9, 10, 8}}, 3),
        (4, {1: {1}, 2: {1}}, 2),
        (4, {}, 2),
        (5, {1: {1, 2, 3, 4, 5}}, 1),
        (8, {1: {2}, 2: {2, 4}, 3: {6}}, 4),
        (3, {1: set()}, 1),
        (12, {1: {1, 12}, 2: {6}}, 3),
    ]
    for n, lines, n_facts in conc:
        union = set().union(*lines.values()) if lines else set()
        al = _alignment(n_facts, set(lines), lines)
        cases.append((f"conciseness {len(union)}/{n}", conciseness(_summary(n), al), Fraction(len(union), n)))
    faith = [(9, 1), (3, 0), (0, 3), (2, 3), (5, 5), (1, 7), (11, 5)]
    for good, bad in faith:
        labels = FaithfulnessLabels((True,) * good + (False,) * bad)
        cases.append((f"faithfulness {good}/{good + bad}", faithfulness(labels), Fraction(good, good + bad)))
    return cases


def test_criterion_1_metric_exactness(capsys):
    with criterion(capsys, "criterion 1 metric exactness (20 fixtures, zero tolerance, < 1 s)") as d:
        start = time.perf_counter()
        cases = metric_fixtures()
        wrong = [label for label, got, want in cases if got != float(want)]
        elapsed = time.perf_counter() - start
        d["info"] = f"{len(cases) - len(wrong)}/{len(cases)} exact in {elapsed:.3f} s"
        assert len(cases) == 20
        assert cases[0][1] == 0.5625 and cases[6][1] == 0.7
        assert not wrong, wrong
        assert elapsed < 1.0


# -- 2 ------------------------------------------------------------------------

mpmath.mp.dps = 60


def oracle_expected(r_self, r_opp):
    return 1 / (1 + mpmath.power(10, (mpmath.mpf(r_opp) - mpmath.mpf(r_self)) / 400))


def oracle_update(r_old, r_opp, s, k):
    return mpmath.mpf(r_old) + mpmath.mpf(k) * (mpmath.mpf(s) - oracle_expected(r_old, r_opp))


def test_criterion_2_elo_formula_oracle(capsys):
    with criterion(capsys, "criterion 2 Elo formula vs high-precision oracle (1000 tuples, 1e-9)") as d:
        rng = random.Random(20240)
        worst_e = worst_u = 0.0
        for _ in range(1000):
            ra, rb = rng.uniform(0, 3000), rng.uniform(0, 3000)
            s, k = rng.choice((0.0, 0.5, 1.0)), rng.uniform(1, 64)
            worst_e = max(worst_e, abs(expected_score(ra, rb) - float(oracle_expected(ra, rb))))
            worst_u = max(worst_u, abs(apply_update(ra, rb, s, k) - float(oracle_update(ra, rb, s, k))))
        d["info"] = f"max error E {worst_e:.2e}, update {worst_u:.2e}"
        assert worst_e <= 1e-9 and worst_u <= 1e-9
        assert abs(expected_score(1000, 1000) - 0.5) <= 1e-3
        assert abs(expected_score(1000, 1400) - 1 / 11) <= 1e-3
        assert abs(expected_score(1200, 1000) - 0.759747) <= 1e-3
        assert abs(apply_update(1200, 1000, 0, 32) - 1175.688) <= 1e-3


# -- 3 ------------------------------------------------------------------------

_ratings = st.floats(-1000, 4000, allow_nan=False, allow_infinity=False)
_s = st.sampled_from((0.0, 0.5, 1.0))
_match_lists = st.lists(st.tuples(st.sampled_from("ABCD"), st.sampled_from("ABCD"), _s), min_size=1, max_size=12)


def _outcomes(matches):
    label = {1.0: Result.WIN, 0.5: Result.DRAW, 0.0: Result.LOSS}
    return [MatchOutcome(f"m{i}", a, b, "completeness", label[s], 0.0) for i, (a, b, s) in enumerate(matches) if a != b]


def _ranks(ratings):
    table = RatingTable({"completeness": {m: ModelRating(r, 0.0, 1) for m, r in ratings.items()}})
    return {row.model_id: row.rank for row in leaderboard(table, "completeness")}


@settings(max_examples=10_000, deadline=None, derandomize=True, suppress_health_check=list(HealthCheck))
@given(_ratings, _ratings, _s, st.floats(0.5, 64), _match_lists, st.floats(-500, 500))
def _elo_properties(a, b, s, k, matches, shift):
    # Zero-sum per match.
    assert abs((apply_update(a, b, s, k) - a) + (apply_update(b, a, 1 - s, k) - b)) < 1e-9
    # Expected scores are complementary.
    assert abs(expected_score(a, b) + expected_score(b, a) - 1) < 1e-12
    # S = E is a fixpoint: a draw between equal ratings, where E = 0.5.
    assert apply_update(a, a, 0.5, k) == a
    assert apply_update(b, b, 0.5, k) == b
    # Winner monotonicity.
    assert apply_update(a, b, 1.0, k) >= a and apply_update(a, b, 0.0, k) <= a
    # Mass conservation over a sequence, and translation invariance of ranks.
    outs = _outcomes(matches)
    base = replay(outs, k, 1000.0, "ABCD")
    moved = replay(outs, k, 1000.0 + shift, "ABCD")
    assert abs(sum(base.values()) - 4000.0) < 1e-6
    assert _ranks(base) == _ranks(moved)


def test_criterion_3_elo_properties(capsys):
    with criterion(capsys, "criterion 3 Elo conservation and symmetry (10,000 property cases)"):
        _elo_properties()


# -- 4 ------------------------------------------------------------------------

MODELS = "ABCD"


def synthetic_round_robin(seed, meetings=50):
    """P(i beats j) = 0.5 + 0.15 * (j - i) for i ahead of j in MODELS; no draws."""
    rng = random.Random(seed)
    outs = []
    for m in range(meetings):
        for a, b in itertools.combinations(MODELS, 2):
            p = 0.5 + 0.15 * (MODELS.index(b) - MODELS.index(a))
            result = Result.WIN if rng.random() < p else Result.LOSS
            outs.append(MatchOutcome(f"m{m:02d}", a, b, "completeness", result, 0.0))
    return outs


def win_rate_order(outs):
    wins = {m: 0 for m in MODELS}
    for o in outs:
        wins[o.model_a if o.result_for_a is Result.WIN else o.model_b] += 1
    return sorted(MODELS, key=lambda m: -wins[m])


def test_criterion_4_permutation_stability(capsys):
    label = "criterion 4 permutation stability (4 models x 50 meetings, 20 seeds, batches within 2 points)"
    with criterion(capsys, label) as d:
        order_ok, worst_gap = 0, 0.0
        for seed in range(20):
            outs = synthetic_round_robin(seed)
            board = leaderboard(rate_all(outs, EloConfig(rng_seed=seed)), "completeness")
            order_ok += [r.model_id for r in board] == win_rate_order(outs)
            # Two disjoint batches of 100 shuffles each, at the default K and start rating.
            first = rate_all(outs, EloConfig(rng_seed=10_000 + seed)).ratings["completeness"]
            second = rate_all(outs, EloConfig(rng_seed=20_000 + seed)).ratings["completeness"]
            worst_gap = max(worst_gap, max(abs(first[m].rating - second[m].rating) for m in MODELS))
        d["info"] = f"ordering matched win rates in {order_ok}/20 seeds; worst batch gap {worst_gap:.2f} points"
        assert order_ok == 20
        assert worst_gap <= 2.0


# -- 5 ------------------------------------------------------------------------


def _run_crafted():
    corpus = tradeoff_corpus(5)
    plan = schedule_matches("ABC", [f"m{i}" for i in range(5)], corpus)
    results = run_tournament(plan, corpus, judge=Judge(MockBackend()), max_facts=6)
    table = rate_all(outcomes_for(results), EloConfig())
    boards = {m: [r.model_id for r in leaderboard(table, m)] for m in ("completeness", "conciseness")}
    return results, table, boards


def test_criterion_5_mock_end_to_end(capsys):
    with criterion(capsys, "criterion 5 mock-judge end to end (3 models x 5 meetings, < 5 s)") as d:
        start = time.perf_counter()
        results, table, boards = _run_crafted()
        again = _run_crafted()
        elapsed = time.perf_counter() - start
        d["info"] = f"completeness {' > '.join(boards['completeness'])}, conciseness {' > '.join(boards['conciseness'])}, {elapsed:.2f} s for two runs"
        assert all(r.valid for r in results) and len(results) == 15
        assert boards["completeness"] == ["A", "B", "C"]
        assert boards["conciseness"] == ["C", "B", "A"]
        assert (results, table, boards) == again
        assert elapsed < 5.0


# -- 6 ------------------------------------------------------------------------


def test_criterion_6_prompt_golden_files(capsys):
    with criterion(capsys, "criterion 6 combined prompt golden files (max_facts 16 and 30)"):
        prompts = FIXTURES / "prompts"
        paragraph = (prompts / "paragraph.txt").read_text(encoding="utf-8")
        summary = SummaryDoc.from_text("m", "x", (prompts / "summary.txt").read_text(encoding="utf-8"))
        schema = 'whose keys are "key fact", "response", and "line number"'
        for n in (16, 30):
            golden = (prompts / f"combined_{n}.txt").read_bytes()
            rendered = PromptKit().render_combined_prompt(paragraph, summary, n).encode("utf-8")
            assert rendered == golden, f"max_facts={n} differs from golden"
            text = golden.decode("utf-8")
            assert all(f"* {fact}" in text for fact in load_example_facts())
            bullets = [ln for ln in text.splitlines() if ln.startswith("* ")]
            assert len(bullets) == 9 and "Kevin Carr" in bullets[0] and schema in text


# -- 7 ------------------------------------------------------------------------


def test_criterion_7_parser_robustness(capsys):
    with criterion(capsys, "criterion 7 parser robustness (12 recoverable, 2 irrecoverable fixtures)") as d:
        responses = FIXTURES / "responses"
        expected = json.loads((responses / "expected.json").read_text())
        facts = KeyFactSet.build(expected["facts"])
        mismatched = []
        for name, want in sorted(expected["cases"].items()):
            al, warnings = parse_alignment_response(
                extract_json_payload((responses / name).read_text()), facts, expected["num_lines"]
            )
            entries = [[e.fact_ordinal, e.supported, sorted(e.line_numbers)] for e in al.entries]
            codes = sorted(f"{w.code}@{'-' if w.fact_ordinal is None else w.fact_ordinal}" for w in warnings)
            if entries != want["entries"] or codes != sorted(want["warnings"]):
                mismatched.append(name)
        rejected = 0
        for name in expected["invalid"]:
            try:
                parse_alignment_response(
                    extract_json_payload((responses / name).read_text()), facts, expected["num_lines"]
                )
            except ValidationError:
                rejected += 1
        d["info"] = f"{12 - len(mismatched)}/12 recovered as documented, {rejected}/2 rejected"
        assert len(expected["cases"]) == 12 and not mismatched, mismatched
        assert rejected == 2


# -- 8 ------------------------------------------------------------------------


def test_criterion_8_self_bias(capsys):
    with criterion(capsys, "criterion 8 self-reference completeness is 1.0 on every fixture summary") as d:
        judge = Judge(MockBackend())
        docs = list(tradeoff_corpus(5).values())
        docs.append(SummaryDoc.from_text("m", "x", (FIXTURES / "prompts" / "summary.txt").read_text()))
        scores = []
        for doc in docs:
            facts = extract_reference_key_facts(ReferenceSource(FactSource.MACHINE_SUMMARY, doc), 16, judge=judge)
            scores.append(score_summary_absolute(doc, facts, judge=judge).completeness)
        d["info"] = f"{sum(s == 1.0 for s in scores)}/{len(scores)} summaries at 1.0"
        assert all(s == 1.0 for s in scores)


# -- 9 ------------------------------------------------------------------------


def test_criterion_9_reproducibility(tmp_path, capsys):
    with criterion(capsys, "criterion 9 compare + rank byte-identical with warm cache and fixed seed") as d:
        meetings, summaries = write_corpus_files(tmp_path)
        cache = tmp_path / "cache"
        outputs = []
        for run in ("cold", "warm"):
            results = tmp_path / f"{run}.jsonl"
            board = tmp_path / f"{run}_board"
            assert main(
                ["compare", "--meetings", str(meetings), "--summaries", str(summaries), "--out", str(results),
                 "--cache-dir", str(cache), "--seed", "7", "--max-key-facts", "6"]
            ) == 0
            err = capsys.readouterr().err
            assert main(["rank", "--results", str(results), "--out", str(board)]) == 0
            files = {p.name: p.read_bytes() for p in sorted(board.iterdir())}
            outputs.append((results.read_bytes(), files, err))
        (cold_results, cold_files, _), (warm_results, warm_files, warm_err) = outputs
        d["info"] = f"{1 + len(cold_files)} files compared; warm run: {warm_err.strip().split('(')[-1].rstrip(')')}"
        assert cold_results == warm_results
        assert cold_files == warm_files and len(cold_files) == 4
        assert "(0 judge calls" in warm_err
