"""Reference-free pairwise evaluation of meeting summaries with Elo ranking."""

from .core import (
    AlignmentEntry,
    AlignmentSet,
    FactSource,
    FaithfulnessLabels,
    KeyFact,
    KeyFactSet,
    MetricScores,
    SummaryDoc,
    Transcript,
    Turn,
    normalize_key_fact,
    split_into_lines,
)
from .elo import EloConfig, RatingTable, apply_update, expected_score, leaderboard, rate_all
from .judge import Judge, JudgeRequest, JudgeResponse, MockBackend, ResponseCache
from .metrics import completeness, conciseness, faithfulness
from .tournament import (
    ComparisonResult,
    MatchOutcome,
    MatchPlan,
    Mode,
    OrderPolicy,
    decide_outcome,
    run_match,
    run_tournament,
    schedule_matches,
)

__version__ = "0.1.0"
