#!/usr/bin/env python3
"""Unit tests for the experiment runners and CSV reports."""

import io
import shutil
import sys
import tempfile
from pathlib import Path

# Add the repo root to path so the package imports without installation
REPO_DIR = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO_DIR))

from tscongruence import bench, core  # noqa: E402
from tscongruence.config import ExperimentConfig  # noqa: E402
from tscongruence.congruence import OptimizerConfig, OptimizerResult  # noqa: E402
from tscongruence.data import Dataset, DatasetEntry, WalkParams, generate_walk  # noqa: E402

# Track test results
passed = 0
failed = 0


def check(name, condition, detail=""):
    global passed, failed
    if condition:
        print(f"  PASS: {name}")
        passed += 1
    else:
        print(f"  FAIL: {name} — {detail}")
        failed += 1


def raises(exc_type, func, *args, **kwargs):
    try:
        func(*args, **kwargs)
    except exc_type:
        return True
    except Exception:
        return False
    return False


def small_record(**overrides):
    values = {
        "pair_id": "p",
        "k": 2,
        "n": 8,
        "d_opt": 1.0,
        "d_delta": 0.5,
        "d_fast_delta": 0.25,
        "d_greedy": 0.75,
        "d_fast_greedy": 0.5,
        "t_opt": 1.0,
        "t_delta": 0.1,
        "t_fast_delta": 0.01,
        "t_greedy": 0.2,
        "t_fast_greedy": 0.02,
        "converged": True,
    }
    values.update(overrides)
    return bench.BenchRecord(**values)


def fixed_optimizer(value):
    """Stand-in for congruence_upper returning a converged run of the given value."""

    def upper(s, t, cfg=None):
        return OptimizerResult(value, core.Isometry.identity(s.k), 1, True, 0.0)

    return upper


def run_tests():
    global passed, failed

    test_dir = Path(tempfile.mkdtemp(prefix="tscongruence_bench_test_"))
    cfg = ExperimentConfig(dimensions=[1, 2], lengths=[8, 12], pairs_per_cell=2, trials=3, repetitions=1, workers=2)
    opt_cfg = OptimizerConfig(multistart_count=3, seed=4)

    try:
        print("\n=== Bench Tests ===\n")

        # --- Test 1: Generated pairs ---
        print("[1] generated_pairs")
        pairs = bench.generated_pairs(cfg, seed=1)
        check("one pair per cell entry", len(pairs) == 8, str(len(pairs)))
        check("pair id format", pairs[0].pair_id == "k1-n8-000" and pairs[-1].pair_id == "k2-n12-001")
        check("shapes follow the cell", all(p.s.n == p.t.n == p.n and p.s.k == p.k for p in pairs))
        again = bench.generated_pairs(cfg, seed=1)
        check("deterministic per seed", all(a.s == b.s and a.t == b.t for a, b in zip(pairs, again)))
        check("sides differ", not pairs[0].s == pairs[0].t)
        other = bench.generated_pairs(cfg, seed=2)
        check("seed changes pairs", not pairs[0].s == other[0].s)
        dewarped = bench.generated_pairs(ExperimentConfig(dimensions=[2], lengths=[10], pairs_per_cell=1, dewarp=True, workers=1))
        check("dewarp keeps the length", dewarped[0].n == 10)

        # --- Test 2: Dataset pairs ---
        print("\n[2] dataset_pairs")
        entries = [DatasetEntry(f"e{i}", generate_walk(WalkParams(2, 10, seed=i))) for i in range(4)]
        entries.append(DatasetEntry("long", generate_walk(WalkParams(2, 12, seed=9))))
        ds = Dataset(entries)
        all_pairs = bench.dataset_pairs(ds, limit=100)
        check("mismatched lengths skipped", len(all_pairs) == 6, str(len(all_pairs)))
        check("pair ids join entry ids", all_pairs[0].pair_id == "e0|e1")
        limited = bench.dataset_pairs(ds, limit=3, seed=5)
        check("limit respected", len(limited) == 3)
        check("sampling deterministic", [p.pair_id for p in limited] == [p.pair_id for p in bench.dataset_pairs(ds, limit=3, seed=5)])
        resampled = bench.dataset_pairs(ds, limit=100, dewarp=True)
        check("dewarp keeps every pair", len(resampled) == 10)
        long_pair = [p for p in resampled if p.pair_id == "e0|long"][0]
        check("dewarp resamples to the shorter length", long_pair.s.n == long_pair.t.n == 10)

        # --- Test 3: Sanity runner ---
        print("\n[3] run_sanity")
        rows, summary = bench.run_sanity(cfg, opt_cfg, n=8)
        check("one row per trial", len(rows) == 6 and summary["rows"] == 6)
        check("no errors", summary["errors"] == 0, str([r["error"] for r in rows]))
        check("trial ids", rows[0]["trial_id"] == "k1-000" and rows[-1]["trial_id"] == "k2-002")
        check("rows carry every column", all(set(bench.SANITY_COLUMNS) <= set(r) for r in rows))
        check("1-D congruent pairs solved", all(r["value"] <= 1e-9 for r in rows if r["k"] == 1))
        check("most congruent pairs solved", summary["fraction_below_limit"] >= 0.8, str(summary))
        check("nothing flagged", summary["flagged"] == 0)
        check("seconds measured per trial", all(r["seconds"] > 0 for r in rows))

        # --- Test 4: Tightness runner ---
        print("\n[4] run_tightness")
        same = core.random_series(8, 1, seed=3)
        mixed = [
            bench.SeriesPair("identical", same, same),
            pairs[2],
            pairs[5],
            bench.SeriesPair("broken", core.random_series(8, 2, seed=1), core.random_series(9, 2, seed=2)),
        ]
        rows, summary = bench.run_tightness(mixed, opt_cfg, cfg)
        check("four rows in input order", [r["pair_id"] for r in rows] == ["identical", pairs[2].pair_id, pairs[5].pair_id, "broken"])
        check("identical pair has zero distance", rows[0]["d_opt"] == 0.0)
        check("ratio empty when d_opt is 0", rows[0]["ratio_delta"] is None and rows[0]["ratio_fast_greedy"] is None)
        check("ratios in [0, 1]", all(0.0 <= rows[i][f"ratio_{c}"] <= 1.0 + 1e-6 for i in (1, 2) for c in ("delta", "greedy")))
        check("failing pair recorded", rows[3]["error"].startswith("DimensionMismatchError"), rows[3]["error"])
        check("run continues after failure", summary["pairs"] == 4 and summary["errors"] == 1)
        check("no violations", summary["violations"] == 0)
        check("mean ratio per approximation", set(summary["mean_ratio"]) == {"delta", "fast-delta", "greedy", "fast-greedy"})
        check("columns include ratios", "ratio_fast_delta" in bench.tightness_columns() and bench.tightness_columns()[-1] == "error")

        congruent = []
        for i in range(5):
            t = generate_walk(WalkParams(2, 16, seed=600 + i))
            congruent.append(bench.SeriesPair(f"rotated-{i}", core.apply_isometry(t, core.random_isometry(2, seed=700 + i)), t))
        rows, summary = bench.run_tightness(congruent, OptimizerConfig(multistart_count=8, seed=0), cfg)
        near_zero = [r for r in rows if r["d_opt"] <= cfg.lower_bound_slack]
        check("rotated congruent pairs reach d_opt ~ 0", len(near_zero) >= 4, str([r["d_opt"] for r in rows]))
        check(
            "congruent pairs: every ratio empty",
            all(r[f"ratio_{c}"] is None for r in near_zero for c in ("delta", "fast_delta", "greedy", "fast_greedy")),
        )
        check("congruent pairs: no violations", summary["violations"] == 0)
        check("congruent pairs left out of the mean ratio", len(near_zero) < 5 or summary["mean_ratio"]["greedy"] is None)

        # delta of the length-2 pair is 1, scaled to 4e-6
        tiny = bench.SeriesPair("tiny", core.TimeSeries([[0, 0], [4e-6, 0]]), core.TimeSeries([[0, 0], [8e-6, 0]]))
        real_upper = bench.congruence_upper
        try:
            bench.congruence_upper = fixed_optimizer(3.5e-6)
            rows, summary = bench.run_tightness([tiny], opt_cfg, cfg)
            check("ratio above 1 + 1e-6 flagged inside the absolute slack", rows[0]["violation_delta"] is True, str(rows[0]))
            bench.congruence_upper = fixed_optimizer(0.5e-6)
            rows, summary = bench.run_tightness([tiny], opt_cfg, cfg)
            check("excess above the slack flagged", rows[0]["violation_delta"] is True and rows[0]["ratio_delta"] is None)
            check("violations counted", summary["violations"] >= 1)
        finally:
            bench.congruence_upper = real_upper

        # --- Test 5: Speedup runner ---
        print("\n[5] run_speedup")
        rows, summary = bench.run_speedup(pairs[4:6], opt_cfg, cfg)
        check("one row per pair", len(rows) == 2 and summary["errors"] == 0)
        check("speedup columns present", all(r["speedup_fast_delta"] > 0 for r in rows))
        check("times positive", all(r["t_opt"] > 0 and r["t_delta"] > 0 for r in rows))
        check("rows match speedup_columns", all(set(bench.speedup_columns()) == set(r) for r in rows), str(sorted(rows[0])))
        check("summary medians", summary["median_speedup"]["delta"] is not None)

        # --- Test 6: BenchRecord ---
        print("\n[6] BenchRecord")
        record = small_record()
        check("speedup is t_opt / t_approx", abs(record.speedups()["fast-delta"] - 100.0) < 1e-9)
        check("no violations below d_opt", record.violations() == [])
        check("violation detected", small_record(d_greedy=1.5).violations() == ["greedy"])
        check("non-converged runs never violate", small_record(d_greedy=1.5, converged=False).violations() == [])
        check("negative distance rejected", raises(ValueError, small_record, d_delta=-1.0))
        check("zero time rejected", raises(ValueError, small_record, t_greedy=0.0))

        # --- Test 7: Scaling runner ---
        print("\n[7] run_scaling")
        rows, summary = bench.run_scaling([16, 32], k=2, runs=2, seed=0)
        check("one row per length", [r["n"] for r in rows] == [16, 32])
        check("first factor empty", rows[0]["factor_delta"] is None)
        check("second factor positive", rows[1]["factor_delta"] > 0 and rows[1]["factor_fast_delta"] > 0)
        check("summary lists lengths", summary["lengths"] == [16, 32] and "within_expected_ranges" in summary)

        # --- Test 8: CSV reports ---
        print("\n[8] write_csv / write_report")
        stream = io.StringIO()
        bench.write_csv(rows, bench.SCALING_COLUMNS, stream)
        lines = stream.getvalue().splitlines()
        check("schema line first", lines[0] == "# schema=1")
        check("header second", lines[1] == ",".join(bench.SCALING_COLUMNS))
        check("one line per row", len(lines) == 4)
        check("None written as empty", lines[2].split(",")[4] == "")
        out = test_dir / "reports" / "scaling.csv"
        bench.write_report(rows, bench.SCALING_COLUMNS, out)
        check("report file written", out.read_text(encoding="utf-8").splitlines()[0] == "# schema=1")

    finally:
        shutil.rmtree(test_dir, ignore_errors=True)

    # --- Summary ---
    print(f"\n{'=' * 40}")
    print(f"Results: {passed} passed, {failed} failed, {passed + failed} total")
    if failed > 0:
        print("SOME TESTS FAILED!")
        return 1
    else:
        print("ALL TESTS PASSED!")
        return 0


def test_bench():
    assert run_tests() == 0


if __name__ == "__main__":
    sys.exit(run_tests())
