"""
Experiment runners behind the sanity / bench-* subcommands.

Every runner returns (rows, summary): rows are flat dicts ready for
write_report, the summary is logged by the CLI. A failing pair is logged,
recorded in the row's `error` column, and the run continues.

Distance values for independent pairs are computed in a thread pool.
Timings are taken one measurement at a time, best of `repetitions`.
"""

from __future__ import annotations

import csv
import logging
import statistics
import sys
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import IO, Any, TypeVar

import numpy as np

try:
    from .approx import APPROXIMATIONS, delta_distance, fast_delta_distance
    from .config import ExperimentConfig
    from .congruence import OptimizerConfig, congruence_upper
    from .core import TimeSeries, apply_isometry, random_isometry
    from .data import Dataset, WalkParams, arc_length_resample, generate_walk
except ImportError:
    from approx import APPROXIMATIONS, delta_distance, fast_delta_distance  # type: ignore[no-redef]
    from config import ExperimentConfig  # type: ignore[no-redef]
    from congruence import OptimizerConfig, congruence_upper  # type: ignore[no-redef]
    from core import TimeSeries, apply_isometry, random_isometry  # type: ignore[no-redef]
    from data import Dataset, WalkParams, arc_length_resample, generate_walk  # type: ignore[no-redef]

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

# Threshold of the congruent-pair sanity check
CONGRUENT_VALUE_LIMIT = 1e-3

# Largest tightness ratio accepted as a lower bound
TIGHTNESS_RATIO_SLACK = 1e-6

# Expected time factors per doubling of n
DELTA_DOUBLING_RANGE = (3.0, 5.0)
FAST_DELTA_DOUBLING_RANGE = (1.6, 2.6)

_T = TypeVar("_T")
_R = TypeVar("_R")


def _column(name: str) -> str:
    return name.replace("-", "_")


@dataclass(frozen=True)
class SeriesPair:
    pair_id: str
    s: TimeSeries
    t: TimeSeries

    @property
    def k(self) -> int:
        return self.s.k

    @property
    def n(self) -> int:
        return self.s.n


@dataclass
class BenchRecord:
    """One speedup row: every distance value with its best-of wall-clock time."""

    pair_id: str
    k: int
    n: int
    d_opt: float
    d_delta: float
    d_fast_delta: float
    d_greedy: float
    d_fast_greedy: float
    t_opt: float
    t_delta: float
    t_fast_delta: float
    t_greedy: float
    t_fast_greedy: float
    converged: bool

    def __post_init__(self) -> None:
        for name, value in self.distances().items():
            if value < 0:
                raise ValueError(f"{name} must be >= 0, got {value}")
        for name in ("t_opt", *(f"t_{_column(a)}" for a in APPROXIMATIONS)):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")

    def distances(self) -> dict[str, float]:
        values = {"opt": self.d_opt}
        values.update({a: getattr(self, f"d_{_column(a)}") for a in APPROXIMATIONS})
        return values

    def speedups(self) -> dict[str, float]:
        return {a: self.t_opt / getattr(self, f"t_{_column(a)}") for a in APPROXIMATIONS}

    def violations(self, slack: float = 1e-6) -> list[str]:
        """Approximations exceeding d_opt + slack on a converged run."""
        if not self.converged:
            return []
        return [a for a in APPROXIMATIONS if getattr(self, f"d_{_column(a)}") > self.d_opt + slack]

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


# --- Pair sources ------------------------------------------------------------


def _seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def generated_pairs(cfg: ExperimentConfig, seed: int = 0) -> list[SeriesPair]:
    """pairs_per_cell pairs of independent random walks per (k, n) cell."""
    pairs: list[SeriesPair] = []
    for k in cfg.dimensions:
        for n in cfg.lengths:
            for index in range(cfg.pairs_per_cell):
                s, t = (
                    generate_walk(WalkParams(k, n, cfg.step_scale, cfg.smoothing_window, _seed(seed, k, n, index, side)))
                    for side in (0, 1)
                )
                if cfg.dewarp:
                    s, t = arc_length_resample(s), arc_length_resample(t)
                pairs.append(SeriesPair(f"k{k}-n{n}-{index:03d}", s, t))
    logger.info("Generated %d random-walk pairs", len(pairs))
    return pairs


def dataset_pairs(dataset: Dataset, limit: int, seed: int = 0, *, dewarp: bool = False) -> list[SeriesPair]:
    """Seeded sample of at most `limit` unordered entry pairs.

    Pairs of differing length are resampled to the shorter length when
    dewarp is on and skipped otherwise.
    """
    entries = dataset.entries
    candidates: list[SeriesPair] = []
    skipped = 0
    for a in range(len(entries)):
        for b in range(a + 1, len(entries)):
            s, t = entries[a].series, entries[b].series
            if dewarp:
                m = min(s.n, t.n)
                if m < 2:
                    skipped += 1
                    continue
                s, t = arc_length_resample(s, m), arc_length_resample(t, m)
            elif s.n != t.n:
                skipped += 1
                continue
            candidates.append(SeriesPair(f"{entries[a].id}|{entries[b].id}", s, t))
    if skipped:
        logger.warning("Skipped %d pairs of differing length (use --dewarp to resample them)", skipped)
    if len(candidates) > limit:
        rng = np.random.default_rng(seed)
        chosen = sorted(rng.choice(len(candidates), size=limit, replace=False).tolist())
        candidates = [candidates[i] for i in chosen]
    logger.info("Selected %d dataset pairs", len(candidates))
    return candidates


# --- Execution helpers -------------------------------------------------------


def _evaluate_parallel(
    func: Callable[[_T], _R], items: Sequence[_T], workers: int, label: Callable[[_T], str]
) -> list[tuple[_R | None, str]]:
    """Run func over items in a thread pool; results come back in input order."""
    results: list[tuple[_R | None, str]] = [(None, "")] * len(items)
    if not items:
        return results
    with ThreadPoolExecutor(max_workers=min(len(items), workers)) as executor:
        futures = {executor.submit(func, item): i for i, item in enumerate(items)}
        for future in as_completed(futures):
            idx = futures[future]
            try:
                results[idx] = (future.result(), "")
            except Exception as e:
                logger.exception("Evaluation failed for %s", label(items[idx]))
                results[idx] = (None, f"{type(e).__name__}: {e}")
    return results


def best_time(func: Callable[[], _R], repetitions: int) -> tuple[_R, float]:
    """Call func `repetitions` times; return the last value and the fastest time."""
    best = float("inf")
    value: _R | None = None
    for _ in range(max(1, repetitions)):
        start = time.perf_counter()
        value = func()
        best = min(best, time.perf_counter() - start)
    assert value is not None
    return value, best


def _soft_check(met: bool, message: str, *args: Any) -> None:
    if met:
        logger.info("Expectation met: " + message, *args)
    else:
        logger.warning("Expectation missed: " + message, *args)


# --- Runners -----------------------------------------------------------------


SANITY_COLUMNS = [
    "trial_id",
    "k",
    "n",
    "value",
    "seconds",
    "converged",
    "iterations",
    "orthogonality_residual",
    "flagged",
    "error",
]


def run_sanity(
    cfg: ExperimentConfig, opt_cfg: OptimizerConfig, n: int | None = None
) -> tuple[list[dict[str, Any]], dict[str, Any]]:
    """Congruent pairs T and M*·T + v*: the optimizer should find value 0.

    Trials run one at a time so the seconds column is not shared with other
    optimizer runs. Rows with value above reasonable_value_limit are flagged
    and left out of the success fraction.
    """
    length = n if n is not None else cfg.lengths[0]
    rows: list[dict[str, Any]] = []
    for k in cfg.dimensions:
        for trial in range(cfg.trials):
            row: dict[str, Any] = {"trial_id": f"k{k}-{trial:03d}", "k": k, "n": length, "error": ""}
            trial_seed = _seed(opt_cfg.seed, k, trial)
            try:
                t = generate_walk(WalkParams(k, length, cfg.step_scale, cfg.smoothing_window, trial_seed))
                s = apply_isometry(t, random_isometry(k, trial_seed, cfg.translation_scale))
                start = time.perf_counter()
                result = congruence_upper(s, t, opt_cfg)
                seconds = time.perf_counter() - start
            except Exception as e:
                logger.exception("Sanity trial failed for k=%d trial=%d", k, trial)
                row["error"] = f"{type(e).__name__}: {e}"
                rows.append(row)
                continue
            row.update(
                {
                    "value": result.value,
                    "seconds": seconds,
                    "converged": result.converged,
                    "iterations": result.iterations_used,
                    "orthogonality_residual": result.orthogonality_residual,
                    "flagged": result.value > cfg.reasonable_value_limit,
                }
            )
            rows.append(row)

    kept = [r for r in rows if not r["error"] and not r.get("flagged")]
    below = sum(1 for r in kept if r["value"] <= CONGRUENT_VALUE_LIMIT)
    summary = {
        "rows": len(rows),
        "errors": sum(1 for r in rows if r["error"]),
        "flagged": sum(1 for r in rows if r.get("flagged")),
        "fraction_below_limit": below / len(kept) if kept else 0.0,
    }
    _soft_check(
        summary["fraction_below_limit"] >= 0.9,
        "%.0f%% of congruent pairs solved to <= %g",
        100.0 * summary["fraction_below_limit"],
        CONGRUENT_VALUE_LIMIT,
    )
    return rows, summary


def tightness_columns() -> list[str]:
    columns = ["pair_id", "k", "n", "d_opt", "converged"]
    columns += [f"d_{_column(a)}" for a in APPROXIMATIONS]
    columns += [f"ratio_{_column(a)}" for a in APPROXIMATIONS]
    columns += [f"violation_{_column(a)}" for a in APPROXIMATIONS]
    return [*columns, "error"]


def run_tightness(
    pairs: Sequence[SeriesPair], opt_cfg: OptimizerConfig, cfg: ExperimentConfig
) -> tuple[list[dict[str, Any]], dict[str, Any]]:
    """Approximation / d^O per pair.

    A d^O within lower_bound_slack of 0 means a congruent pair: its ratios
    are 0/0 and left empty. A converged pair is a violation when an
    approximation exceeds d^O by the slack or its ratio exceeds 1 + 1e-6.
    """

    def evaluate(pair: SeriesPair) -> dict[str, Any]:
        result = congruence_upper(pair.s, pair.t, opt_cfg)
        row: dict[str, Any] = {"d_opt": result.value, "converged": result.converged}
        for name, func in APPROXIMATIONS.items():
            value = func(pair.s, pair.t)
            col = _column(name)
            row[f"d_{col}"] = value
            ratio = value / result.value if result.value > cfg.lower_bound_slack else None
            row[f"ratio_{col}"] = ratio
            row[f"violation_{col}"] = result.converged and (
                value > result.value + cfg.lower_bound_slack or (ratio is not None and ratio > 1.0 + TIGHTNESS_RATIO_SLACK)
            )
        return row

    outcomes = _evaluate_parallel(evaluate, pairs, cfg.workers, lambda pair: pair.pair_id)
    rows: list[dict[str, Any]] = []
    for pair, (outcome, error) in zip(pairs, outcomes):
        row: dict[str, Any] = {"pair_id": pair.pair_id, "k": pair.k, "n": pair.n, "error": error}
        row.update(outcome or {})
        rows.append(row)

    mean_ratio: dict[str, float | None] = {}
    for name in APPROXIMATIONS:
        ratios = [r[f"ratio_{_column(name)}"] for r in rows if r.get(f"ratio_{_column(name)}") is not None]
        mean_ratio[name] = statistics.fmean(ratios) if ratios else None
    violations = sum(1 for r in rows for a in APPROXIMATIONS if r.get(f"violation_{_column(a)}"))
    summary = {
        "pairs": len(rows),
        "errors": sum(1 for r in rows if r["error"]),
        "violations": violations,
        "mean_ratio": mean_ratio,
    }
    if mean_ratio["greedy"] is not None and mean_ratio["delta"] is not None:
        _soft_check(
            mean_ratio["greedy"] >= mean_ratio["delta"],
            "greedy mean ratio %.3f >= delta mean ratio %.3f",
            mean_ratio["greedy"],
            mean_ratio["delta"],
        )
    if violations:
        logger.error("%d lower-bound violations detected", violations)
    return rows, summary


def speedup_columns() -> list[str]:
    columns = [f.name for f in fields(BenchRecord)]
    return [*columns, *(f"speedup_{_column(a)}" for a in APPROXIMATIONS), "error"]


def run_speedup(
    pairs: Sequence[SeriesPair], opt_cfg: OptimizerConfig, cfg: ExperimentConfig
) -> tuple[list[dict[str, Any]], dict[str, Any]]:
    """Best-of-repetitions timing of the optimizer against each approximation."""
    rows: list[dict[str, Any]] = []
    records: list[BenchRecord] = []
    for pair in pairs:
        try:
            result, t_opt = best_time(lambda pair=pair: congruence_upper(pair.s, pair.t, opt_cfg), cfg.repetitions)
            values: dict[str, Any] = {}
            for name, func in APPROXIMATIONS.items():
                value, seconds = best_time(lambda func=func, pair=pair: func(pair.s, pair.t), cfg.repetitions)
                values[f"d_{_column(name)}"] = value
                values[f"t_{_column(name)}"] = seconds
            record = BenchRecord(
                pair_id=pair.pair_id,
                k=pair.k,
                n=pair.n,
                d_opt=result.value,
                t_opt=t_opt,
                converged=result.converged,
                **values,
            )
        except Exception as e:
            logger.exception("Speedup measurement failed for %s", pair.pair_id)
            rows.append({"pair_id": pair.pair_id, "k": pair.k, "n": pair.n, "error": f"{type(e).__name__}: {e}"})
            continue
        records.append(record)
        row = record.to_dict()
        row.update({f"speedup_{_column(a)}": v for a, v in record.speedups().items()})
        row["error"] = ""
        rows.append(row)

    median_speedup = {
        a: statistics.median(r.speedups()[a] for r in records) if records else None for a in APPROXIMATIONS
    }
    median_time = {
        a: statistics.median(getattr(r, f"t_{_column(a)}") for r in records) if records else None
        for a in APPROXIMATIONS
    }
    violations = sum(len(r.violations(cfg.lower_bound_slack)) for r in records)
    summary = {
        "pairs": len(rows),
        "errors": len(rows) - len(records),
        "violations": violations,
        "median_speedup": median_speedup,
        "median_seconds": median_time,
    }
    if records:
        fastest = min(median_time, key=lambda a: median_time[a] or float("inf"))
        _soft_check(fastest == "fast-delta", "fastest approximation is fast-delta (got %s)", fastest)
    if violations:
        logger.error("%d lower-bound violations detected", violations)
    return rows, summary


SCALING_COLUMNS = ["n", "k", "t_delta", "t_fast_delta", "factor_delta", "factor_fast_delta"]


def run_scaling(
    lengths: Sequence[int], k: int = 2, runs: int = 20, seed: int = 0
) -> tuple[list[dict[str, Any]], dict[str, Any]]:
    """Median time of delta and fast delta per length, and the factor per step.

    Factors are checked against the quadratic and n·log n expectations only
    where consecutive lengths double.
    """
    rows: list[dict[str, Any]] = []
    previous: dict[str, Any] | None = None
    within = True
    for n in lengths:
        s = generate_walk(WalkParams(k, n, seed=_seed(seed, n, 0)))
        t = generate_walk(WalkParams(k, n, seed=_seed(seed, n, 1)))
        t_delta = statistics.median(best_time(lambda s=s, t=t: delta_distance(s, t), 1)[1] for _ in range(runs))
        t_fast = statistics.median(best_time(lambda s=s, t=t: fast_delta_distance(s, t), 1)[1] for _ in range(runs))
        row: dict[str, Any] = {
            "n": n,
            "k": k,
            "t_delta": t_delta,
            "t_fast_delta": t_fast,
            "factor_delta": None,
            "factor_fast_delta": None,
        }
        if previous is not None:
            row["factor_delta"] = t_delta / previous["t_delta"]
            row["factor_fast_delta"] = t_fast / previous["t_fast_delta"]
            if n == 2 * previous["n"]:
                low, high = DELTA_DOUBLING_RANGE
                ok_delta = low <= row["factor_delta"] <= high
                low, high = FAST_DELTA_DOUBLING_RANGE
                ok_fast = low <= row["factor_fast_delta"] <= high
                _soft_check(ok_delta, "delta time factor %.2f at n=%d", row["factor_delta"], n)
                _soft_check(ok_fast, "fast delta time factor %.2f at n=%d", row["factor_fast_delta"], n)
                within = within and ok_delta and ok_fast
        rows.append(row)
        previous = row
    return rows, {"lengths": list(lengths), "within_expected_ranges": within}


# --- Reports -----------------------------------------------------------------


def write_csv(rows: Sequence[dict[str, Any]], columns: Sequence[str], stream: IO[str]) -> None:
    stream.write(f"# schema={SCHEMA_VERSION}\n")
    writer = csv.DictWriter(stream, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)


def write_report(rows: Sequence[dict[str, Any]], columns: Sequence[str], output: Path | str | None = None) -> None:
    """Write rows as CSV to output, or to stdout when output is None."""
    if output is None:
        write_csv(rows, columns, sys.stdout)
        return
    path = Path(output)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        write_csv(rows, columns, f)
    logger.info("Wrote %d rows to %s", len(rows), path)
