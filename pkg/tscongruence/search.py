"""
Filter-and-refine similarity queries over a Dataset.

A cheap lower bound ranks and prunes candidates; congruence_upper refines
the survivors. Since d^O >= d^C >= bound, a pruned candidate could never
have entered the answer. Linear scan only, no index structure.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass

try:
    from .approx import APPROXIMATIONS
    from .congruence import OptimizerConfig, congruence_upper
    from .core import TimeSeries
    from .data import Dataset, DatasetEntry
except ImportError:
    from approx import APPROXIMATIONS  # type: ignore[no-redef]
    from congruence import OptimizerConfig, congruence_upper  # type: ignore[no-redef]
    from core import TimeSeries  # type: ignore[no-redef]
    from data import Dataset, DatasetEntry  # type: ignore[no-redef]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QueryMatch:
    id: str
    label: str | None
    lower_bound: float
    distance: float


@dataclass
class QueryStats:
    candidates: int = 0
    refined: int = 0
    pruned: int = 0
    skipped: int = 0


def _ranked_candidates(
    query: TimeSeries, dataset: Dataset, bound: str, stats: QueryStats
) -> list[tuple[float, int, DatasetEntry]]:
    if bound not in APPROXIMATIONS:
        raise ValueError(f"Unknown lower bound {bound!r}; expected one of {sorted(APPROXIMATIONS)}")
    func = APPROXIMATIONS[bound]
    ranked: list[tuple[float, int, DatasetEntry]] = []
    for index, entry in enumerate(dataset):
        if entry.series.n != query.n or entry.series.k != query.k:
            stats.skipped += 1
            continue
        ranked.append((func(query, entry.series), index, entry))
    if stats.skipped:
        logger.info("Skipped %d entries whose shape differs from the query", stats.skipped)
    stats.candidates = len(ranked)
    ranked.sort(key=lambda item: (item[0], item[1]))
    return ranked


def knn_query(
    query: TimeSeries,
    dataset: Dataset,
    k: int,
    bound: str = "greedy",
    opt_cfg: OptimizerConfig | None = None,
) -> tuple[list[QueryMatch], QueryStats]:
    """The k entries closest to query under d^O, nearest first."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    stats = QueryStats()
    ranked = _ranked_candidates(query, dataset, bound, stats)
    # max-heap of the k best refined values, stored negated
    best: list[tuple[float, int, QueryMatch]] = []
    for position, (lower, index, entry) in enumerate(ranked):
        if len(best) == k and lower >= -best[0][0]:
            stats.pruned = len(ranked) - position
            break
        distance = congruence_upper(query, entry.series, opt_cfg).value
        stats.refined += 1
        match = QueryMatch(entry.id, entry.label, lower, distance)
        if len(best) < k:
            heapq.heappush(best, (-distance, -index, match))
        elif distance < -best[0][0]:
            heapq.heapreplace(best, (-distance, -index, match))
    matches = sorted((item[2] for item in best), key=lambda m: m.distance)
    logger.info(
        "knn k=%d: %d candidates, %d refined, %d pruned", k, stats.candidates, stats.refined, stats.pruned
    )
    return matches, stats


def range_query(
    query: TimeSeries,
    dataset: Dataset,
    epsilon: float,
    bound: str = "greedy",
    opt_cfg: OptimizerConfig | None = None,
) -> tuple[list[QueryMatch], QueryStats]:
    """Entries with d^O <= epsilon, nearest first."""
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    stats = QueryStats()
    matches: list[QueryMatch] = []
    ranked = _ranked_candidates(query, dataset, bound, stats)
    for position, (lower, _, entry) in enumerate(ranked):
        if lower > epsilon:
            stats.pruned = len(ranked) - position
            break
        distance = congruence_upper(query, entry.series, opt_cfg).value
        stats.refined += 1
        if distance <= epsilon:
            matches.append(QueryMatch(entry.id, entry.label, lower, distance))
    matches.sort(key=lambda m: m.distance)
    logger.info(
        "range eps=%g: %d candidates, %d refined, %d pruned", epsilon, stats.candidates, stats.refined, stats.pruned
    )
    return matches, stats
