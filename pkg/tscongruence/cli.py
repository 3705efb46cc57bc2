"""
Command-line surface.

    tscongruence dist A.csv B.csv --measure all
    tscongruence gen --k 2 --n 64 --count 50 --output walks.jsonl
    tscongruence dewarp walks.jsonl --output dewarped.jsonl
    tscongruence sanity --k 1 2 3 --n 32 --trials 20 --output sanity.csv
    tscongruence bench-tightness --dataset walks.jsonl --limit 100
    tscongruence bench-speedup --k 3 --n 64 --pairs 20
    tscongruence bench-scaling --lengths 1024 2048 4096
    tscongruence query --dataset walks.jsonl --query-id walk-0000 --knn 5

Exit codes: 0 success, 1 lower-bound violation detected, 2 usage or
validation error. Reports are CSV on stdout unless --output is given;
diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from collections.abc import Sequence
from importlib import metadata
from pathlib import Path
from typing import Any

try:
    from .approx import APPROXIMATIONS, dtw_distance
    from .bench import (
        SANITY_COLUMNS,
        SCALING_COLUMNS,
        SeriesPair,
        dataset_pairs,
        generated_pairs,
        run_sanity,
        run_scaling,
        run_speedup,
        run_tightness,
        speedup_columns,
        tightness_columns,
        write_report,
    )
    from .config import Settings, load_config
    from .congruence import METHODS, congruence_upper
    from .core import TimeSeries
    from .data import (
        Dataset,
        DatasetEntry,
        SeriesFormat,
        WalkParams,
        arc_length_resample,
        generate_dataset,
        load_dataset,
        save_dataset,
    )
    from .search import knn_query, range_query
except ImportError:
    from approx import APPROXIMATIONS, dtw_distance  # type: ignore[no-redef]
    from bench import (  # type: ignore[no-redef]
        SANITY_COLUMNS,
        SCALING_COLUMNS,
        SeriesPair,
        dataset_pairs,
        generated_pairs,
        run_sanity,
        run_scaling,
        run_speedup,
        run_tightness,
        speedup_columns,
        tightness_columns,
        write_report,
    )
    from config import Settings, load_config  # type: ignore[no-redef]
    from congruence import METHODS, congruence_upper  # type: ignore[no-redef]
    from core import TimeSeries  # type: ignore[no-redef]
    from data import (  # type: ignore[no-redef]
        Dataset,
        DatasetEntry,
        SeriesFormat,
        WalkParams,
        arc_length_resample,
        generate_dataset,
        load_dataset,
        save_dataset,
    )
    from search import knn_query, range_query  # type: ignore[no-redef]

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2

# Measures printed by `dist --measure all`, in this order
ALL_MEASURES = ("dtw", *APPROXIMATIONS)

FORMATS = [f.value for f in SeriesFormat]


def _version() -> str:
    try:
        return metadata.version("tscongruence")
    except metadata.PackageNotFoundError:
        return "unknown"


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def _settings(args: argparse.Namespace) -> Settings:
    """Config files first, then explicit flags on top."""
    settings = load_config(args.config)
    experiment: dict[str, Any] = {}
    optimizer: dict[str, Any] = {}
    for flag, key in (
        ("k", "dimensions"),
        ("n", "lengths"),
        ("trials", "trials"),
        ("pairs", "pairs_per_cell"),
        ("repetitions", "repetitions"),
        ("workers", "workers"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            experiment[key] = value
    if getattr(args, "dewarp", False):
        experiment["dewarp"] = True
    for flag, key in (("multistart", "multistart_count"), ("max_iter", "max_iterations"), ("seed", "seed"), ("method", "method")):
        value = getattr(args, flag, None)
        if value is not None:
            optimizer[key] = value
    return Settings(
        experiment=dataclasses.replace(settings.experiment, **experiment),
        optimizer=dataclasses.replace(settings.optimizer, **optimizer),
    )


def _report_summary(name: str, summary: dict[str, Any]) -> None:
    logger.info("%s summary: %s", name, summary)
    print(f"{name}: {json.dumps(summary, default=str)}", file=sys.stderr)


# --- dist --------------------------------------------------------------------


def _pick(dataset: Dataset, entry_id: str | None, path: str) -> TimeSeries:
    if entry_id is not None:
        return dataset.get(entry_id).series
    if not len(dataset):
        raise ValueError(f"No series in {path}")
    return dataset.entries[0].series


def _load_dist_inputs(args: argparse.Namespace) -> tuple[TimeSeries, TimeSeries]:
    ids = args.ids or [None, None]
    first = load_dataset(args.inputs[0], args.format)
    if len(args.inputs) == 1:
        if args.ids is None:
            if len(first) < 2:
                raise ValueError(f"{args.inputs[0]} holds fewer than two series; pass a second file")
            return first.entries[0].series, first.entries[1].series
        return _pick(first, ids[0], args.inputs[0]), _pick(first, ids[1], args.inputs[0])
    second = load_dataset(args.inputs[1], args.format)
    return _pick(first, ids[0], args.inputs[0]), _pick(second, ids[1], args.inputs[1])


def cmd_dist(args: argparse.Namespace) -> int:
    s, t = _load_dist_inputs(args)
    if args.dewarp:
        m = min(s.n, t.n)
        s, t = arc_length_resample(s, m), arc_length_resample(t, m)
    measures = ALL_MEASURES if args.measure == "all" else (args.measure,)
    values: list[tuple[str, float]] = []
    for measure in measures:
        if measure == "dtw":
            values.append((measure, dtw_distance(s, t)))
        elif measure == "congruence":
            result = congruence_upper(s, t, _settings(args).optimizer)
            if not result.converged:
                logger.warning("Optimizer did not converge (residual %.3e)", result.orthogonality_residual)
            values.append((measure, result.value))
        else:
            values.append((measure, APPROXIMATIONS[measure](s, t)))
    if len(values) == 1:
        print(f"{values[0][1]:.9f}")
    else:
        for name, value in values:
            print(f"{name} {value:.9f}")
    return EXIT_OK


# --- gen / dewarp ------------------------------------------------------------


def cmd_gen(args: argparse.Namespace) -> int:
    if not args.output:
        raise ValueError("gen needs --output")
    params = WalkParams(args.k, args.n, args.step_scale, args.smoothing_window, args.seed or 0)
    dataset = generate_dataset(params, args.count, args.label)
    save_dataset(dataset, args.output, args.format)
    return EXIT_OK


def cmd_dewarp(args: argparse.Namespace) -> int:
    if not args.output:
        raise ValueError("dewarp needs --output")
    dataset = load_dataset(args.input, args.format)
    resampled = Dataset(
        [
            DatasetEntry(entry.id, arc_length_resample(entry.series, args.m, args.method), entry.label)
            for entry in dataset
        ]
    )
    save_dataset(resampled, args.output, args.output_format)
    return EXIT_OK


# --- experiments -------------------------------------------------------------


def _pairs(args: argparse.Namespace, settings: Settings) -> list[SeriesPair]:
    seed = settings.optimizer.seed
    if args.dataset:
        dataset = load_dataset(args.dataset, args.format)
        return dataset_pairs(dataset, args.limit, seed, dewarp=settings.experiment.dewarp)
    return generated_pairs(settings.experiment, seed)


def cmd_sanity(args: argparse.Namespace) -> int:
    settings = _settings(args)
    rows, summary = run_sanity(settings.experiment, settings.optimizer, settings.experiment.lengths[0])
    write_report(rows, SANITY_COLUMNS, args.output)
    _report_summary("sanity", summary)
    return EXIT_OK


def cmd_bench_tightness(args: argparse.Namespace) -> int:
    settings = _settings(args)
    rows, summary = run_tightness(_pairs(args, settings), settings.optimizer, settings.experiment)
    write_report(rows, tightness_columns(), args.output)
    _report_summary("bench-tightness", summary)
    return EXIT_VIOLATION if summary["violations"] else EXIT_OK


def cmd_bench_speedup(args: argparse.Namespace) -> int:
    settings = _settings(args)
    rows, summary = run_speedup(_pairs(args, settings), settings.optimizer, settings.experiment)
    write_report(rows, speedup_columns(), args.output)
    _report_summary("bench-speedup", summary)
    return EXIT_VIOLATION if summary["violations"] else EXIT_OK


def cmd_bench_scaling(args: argparse.Namespace) -> int:
    rows, summary = run_scaling(args.lengths, args.k, args.runs, args.seed or 0)
    write_report(rows, SCALING_COLUMNS, args.output)
    _report_summary("bench-scaling", summary)
    return EXIT_OK


# --- query -------------------------------------------------------------------


def cmd_query(args: argparse.Namespace) -> int:
    settings = _settings(args)
    dataset = load_dataset(args.dataset, args.format)
    if args.query_file:
        query = load_dataset(args.query_file).entries[0].series
        candidates = dataset
    elif args.query_id:
        query = dataset.get(args.query_id).series
        candidates = Dataset([entry for entry in dataset if entry.id != args.query_id])
    else:
        raise ValueError("query needs --query-file or --query-id")
    if args.knn is not None:
        matches, stats = knn_query(query, candidates, args.knn, args.bound, settings.optimizer)
    else:
        matches, stats = range_query(query, candidates, args.epsilon, args.bound, settings.optimizer)
    write_report(
        [dataclasses.asdict(match) for match in matches], ["id", "label", "lower_bound", "distance"], args.output
    )
    _report_summary("query", dataclasses.asdict(stats))
    return EXIT_OK


# --- parser ------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
    parser.add_argument("--config", help="YAML/JSON settings file (default: $TSCONGRUENCE_CONFIG)")
    parser.add_argument("--seed", type=int, help="base seed for generators and the optimizer")
    parser.add_argument("--output", help="output path (default: stdout)")
    parser.add_argument("--format", choices=FORMATS, help="input format (default: from extension)")


def _add_optimizer(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--multistart", type=int, help="number of optimizer starts")
    parser.add_argument("--max-iter", type=int, help="optimizer iteration budget per round")
    parser.add_argument("--method", choices=METHODS, help="optimizer method")


def _add_grid(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k", type=int, nargs="+", help="dimensions")
    parser.add_argument("--n", type=int, nargs="+", help="series lengths")
    parser.add_argument("--workers", type=int, help="thread pool size")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tscongruence",
        description="Congruence distance of multi-dimensional time series and its lower bounds.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dist", help="distance between two series")
    _add_common(p)
    _add_optimizer(p)
    p.add_argument("inputs", nargs="+", help="one collection file, or two series files")
    p.add_argument("--measure", default="all", choices=["all", *ALL_MEASURES, "congruence"])
    p.add_argument("--ids", nargs=2, metavar=("ID_S", "ID_T"), help="entry ids to pick from the inputs")
    p.add_argument("--dewarp", action="store_true", help="arc-length resample both series first")
    p.set_defaults(handler=cmd_dist)

    p = sub.add_parser("gen", help="generate smoothed random walks")
    _add_common(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--step-scale", type=float, default=1.0)
    p.add_argument("--smoothing-window", type=int, default=3)
    p.add_argument("--label")
    p.set_defaults(handler=cmd_gen)

    p = sub.add_parser("dewarp", help="arc-length resample every series of a dataset")
    _add_common(p)
    p.add_argument("input")
    p.add_argument("--m", type=int, help="target length (default: each series' own length)")
    p.add_argument("--method", choices=["chord", "arc"], default="chord")
    p.add_argument("--output-format", choices=FORMATS, help="output format (default: from extension)")
    p.set_defaults(handler=cmd_dewarp)

    p = sub.add_parser("sanity", help="optimizer on congruent pairs")
    _add_common(p)
    _add_optimizer(p)
    _add_grid(p)
    p.add_argument("--trials", type=int)
    p.set_defaults(handler=cmd_sanity)

    for name, handler, helptext in (
        ("bench-tightness", cmd_bench_tightness, "approximation / optimizer ratios"),
        ("bench-speedup", cmd_bench_speedup, "optimizer time / approximation time"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
        _add_optimizer(p)
        _add_grid(p)
        p.add_argument("--dataset", help="dataset file (default: generated random walks)")
        p.add_argument("--limit", type=int, default=100, help="max dataset pairs")
        p.add_argument("--pairs", type=int, help="generated pairs per (k, n) cell")
        p.add_argument("--repetitions", type=int, help="timing repetitions, best of")
        p.add_argument("--dewarp", action="store_true")
        p.set_defaults(handler=handler)

    p = sub.add_parser("bench-scaling", help="delta / fast delta time against n")
    _add_common(p)
    p.add_argument("--lengths", type=int, nargs="+", default=[1024, 2048, 4096])
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--runs", type=int, default=20)
    p.set_defaults(handler=cmd_bench_scaling)

    p = sub.add_parser("query", help="k-NN or range query with lower-bound pruning")
    _add_common(p)
    _add_optimizer(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--query-file")
    p.add_argument("--query-id")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--knn", type=int)
    group.add_argument("--epsilon", type=float)
    p.add_argument("--bound", choices=list(APPROXIMATIONS), default="greedy")
    p.set_defaults(handler=cmd_query)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    _configure_logging(args.verbose)
    try:
        return int(args.handler(args))
    except (ValueError, FileNotFoundError, KeyError) as e:
        message = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"Error: {message}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
