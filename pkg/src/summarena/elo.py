"""Elo ratings over pairwise outcomes, averaged across shuffled match orders.

Sequential Elo depends on the order matches are replayed in. :func:`rate_all`
replays the outcome list under ``permutations`` seeded shuffles and reports
each model's mean final rating and its standard deviation across shuffles.
"""

from __future__ import annotations

import random
import statistics
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import RatingError
from .tournament import MatchOutcome

ALLOWED_SCORES = (0.0, 0.5, 1.0)
TIE_TOLERANCE = 1e-6


@dataclass(frozen=True)
class EloConfig:
    k_factor: float = 32.0
    initial_rating: float = 1000.0
    permutations: int = 100
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.k_factor <= 0:
            raise ValueError(f"k_factor must be positive, got {self.k_factor}")
        if self.permutations < 1:
            raise ValueError(f"permutations must be >= 1, got {self.permutations}")


def expected_score(r_self: float, r_opp: float) -> float:
    """Probability that a player rated ``r_self`` beats one rated ``r_opp``."""
    exponent = (r_opp - r_self) / 400.0
    try:
        return 1.0 / (1.0 + 10.0**exponent)
    except OverflowError:
        return 0.0


def apply_update(r_old: float, r_opp: float, actual: float, k: float) -> float:
    if actual not in ALLOWED_SCORES:
        raise ValueError(f"actual score must be 0, 0.5 or 1, got {actual}")
    return r_old + k * (actual - expected_score(r_old, r_opp))


def replay(
    outcomes: Iterable[MatchOutcome], k: float, initial_rating: float, models: Iterable[str] = ()
) -> dict[str, float]:
    """Apply ``outcomes`` in order from equal starting ratings.

    Both players move by the same amount in opposite directions, which is
    what the two per-player updates give when they share ``k``.
    """
    ratings = {m: initial_rating for m in models}
    for o in outcomes:
        ra = ratings.setdefault(o.model_a, initial_rating)
        rb = ratings.setdefault(o.model_b, initial_rating)
        delta = k * (o.score_a - expected_score(ra, rb))
        ratings[o.model_a] = ra + delta
        ratings[o.model_b] = rb - delta
    return ratings


@dataclass(frozen=True)
class ModelRating:
    rating: float
    spread: float
    matches: int


@dataclass(frozen=True)
class RatingTable:
    ratings: Mapping[str, Mapping[str, ModelRating]]
    config: EloConfig = field(default_factory=EloConfig)

    @property
    def metrics(self) -> list[str]:
        return list(self.ratings)

    def to_dict(self) -> dict:
        return {
            "config": {
                "k_factor": self.config.k_factor,
                "initial_rating": self.config.initial_rating,
                "permutations": self.config.permutations,
                "rng_seed": self.config.rng_seed,
            },
            "ratings": {
                metric: {
                    model: {"rating": r.rating, "spread": r.spread, "matches": r.matches}
                    for model, r in sorted(per_model.items())
                }
                for metric, per_model in self.ratings.items()
            },
        }


def _canonical(outcomes: list[MatchOutcome]) -> list[MatchOutcome]:
    return sorted(outcomes, key=lambda o: (o.meeting_id, o.model_a, o.model_b, o.result_for_a.value))


def rate_metric(outcomes: list[MatchOutcome], config: EloConfig, metric: str) -> dict[str, ModelRating]:
    base = _canonical(outcomes)
    models = sorted({m for o in base for m in (o.model_a, o.model_b)})
    played = {m: 0 for m in models}
    for o in base:
        played[o.model_a] += 1
        played[o.model_b] += 1

    finals: dict[str, list[float]] = {m: [] for m in models}
    for p in range(config.permutations):
        order = list(base)
        random.Random(f"{config.rng_seed}:{metric}:{p}").shuffle(order)
        ratings = replay(order, config.k_factor, config.initial_rating, models)
        for m in models:
            finals[m].append(ratings[m])

    return {
        m: ModelRating(
            rating=statistics.fmean(finals[m]),
            spread=statistics.pstdev(finals[m]),
            matches=played[m],
        )
        for m in models
    }


def rate_all(outcomes: Iterable[MatchOutcome], config: EloConfig | None = None) -> RatingTable:
    """Rate every metric present in ``outcomes`` independently; invalid outcomes are skipped."""
    config = config or EloConfig()
    by_metric: dict[str, list[MatchOutcome]] = {}
    for o in outcomes:
        if o.valid:
            by_metric.setdefault(o.metric, []).append(o)
    if not by_metric:
        raise RatingError("no valid match outcomes to rate")
    return RatingTable(
        {metric: rate_metric(items, config, metric) for metric, items in sorted(by_metric.items())},
        config,
    )


@dataclass(frozen=True)
class LeaderboardRow:
    rank: int
    model_id: str
    rating: float
    spread: float
    matches: int


def leaderboard(table: RatingTable, metric: str, *, ties: str = "exact") -> list[LeaderboardRow]:
    """Rank models by mean rating, highest first, with shared ranks for ties.

    ``ties="exact"`` ties equal means (to within 1e-6). ``ties="overlap"``
    also ties a model with the one above it when their mean +/- spread
    intervals overlap.
    """
    if ties not in ("exact", "overlap"):
        raise ValueError(f"unknown tie policy {ties!r}")
    per_model = table.ratings.get(metric)
    if not per_model:
        raise RatingError(f"no ratings for metric {metric!r}")
    ordered = sorted(per_model.items(), key=lambda kv: (-kv[1].rating, kv[0]))
    rows: list[LeaderboardRow] = []
    for position, (model, r) in enumerate(ordered, start=1):
        rank = position
        if rows:
            prev = rows[-1]
            tied = abs(prev.rating - r.rating) <= TIE_TOLERANCE
            if ties == "overlap":
                tied = tied or prev.rating - prev.spread <= r.rating + r.spread
            if tied:
                rank = prev.rank
        rows.append(LeaderboardRow(rank, model, r.rating, r.spread, r.matches))
    return rows
