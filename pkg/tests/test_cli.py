#!/usr/bin/env python3
"""End-to-end tests of the tscongruence command line through main()."""

import io
import shutil
import sys
import tempfile
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path

# Add the repo root to path so the package imports without installation
REPO_DIR = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO_DIR))

from tscongruence import bench, core, data  # noqa: E402
from tscongruence.cli import EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, main  # noqa: E402
from tscongruence.congruence import OptimizerResult  # noqa: E402
from tscongruence.data import Dataset, DatasetEntry  # noqa: E402

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


def run(*argv):
    """Run the CLI and return (exit code, stdout, stderr)."""
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main([str(a) for a in argv])
    return code, out.getvalue(), err.getvalue()


def write_single(path, points):
    data.save_dataset(Dataset([DatasetEntry(path.stem, core.TimeSeries(points))]), path)
    return path


def run_tests():
    global passed, failed

    test_dir = Path(tempfile.mkdtemp(prefix="tscongruence_cli_test_"))

    try:
        print("\n=== CLI Tests ===\n")

        s_path = write_single(test_dir / "s.csv", [[0, 0], [1, 0]])
        t_path = write_single(test_dir / "t.csv", [[0, 0], [2, 0]])
        long_path = write_single(test_dir / "long.csv", [[0, 0], [1, 0], [3, 0]])

        # --- Test 1: dist ---
        print("[1] dist")
        code, out, _ = run("dist", s_path, t_path, "--measure", "delta")
        check("delta of the length-2 pair", code == EXIT_OK and out.strip() == "1.000000000", repr(out))
        code, out, _ = run("dist", s_path, s_path)
        lines = out.strip().splitlines()
        check("all measures listed", [line.split()[0] for line in lines] == ["dtw", "delta", "fast-delta", "greedy", "fast-greedy"], out)
        check("all zero for S=S", all(line.split()[1] == "0.000000000" for line in lines))
        code, out, _ = run("dist", s_path, t_path, "--measure", "congruence", "--multistart", "2")
        check("congruence of the length-2 pair", code == EXIT_OK and abs(float(out) - 1.0) < 1e-6, repr(out))
        code, _, err = run("dist", s_path, long_path, "--measure", "delta")
        check("length mismatch is a usage error", code == EXIT_USAGE and err.startswith("Error:"), err)
        code, out, _ = run("dist", s_path, long_path, "--measure", "dtw")
        check("dtw accepts different lengths", code == EXIT_OK and out.strip() == "2.000000000", repr(out))
        code, out, _ = run("dist", s_path, long_path, "--measure", "delta", "--dewarp")
        check("dewarp makes lengths comparable", code == EXIT_OK and float(out) >= 0.0)

        # --- Test 2: gen / dewarp ---
        print("\n[2] gen / dewarp")
        walks = test_dir / "walks.jsonl"
        code, _, _ = run("gen", "--k", 2, "--n", 10, "--count", 5, "--seed", 3, "--label", "w", "--output", walks)
        generated = data.load_dataset(walks)
        check("gen writes count series", code == EXIT_OK and len(generated) == 5 and generated.dimension == 2)
        check("gen labels", all(e.label == "w" for e in generated))
        code, _, err = run("gen", "--k", 2, "--n", 10, "--count", 2, "--output", test_dir / "two.csv")
        check("two series into csv-single rejected", code == EXIT_USAGE, err)
        code, _, _ = run("gen", "--k", 2, "--n", 10)
        check("gen without --output rejected", code == EXIT_USAGE)

        code, out, _ = run("dist", walks, "--ids", "walk-0000", "walk-0003", "--measure", "greedy")
        check("dist picks ids from one collection", code == EXIT_OK and float(out) > 0.0)
        code, _, err = run("dist", walks, "--ids", "walk-0000", "missing")
        check("unknown id is a usage error", code == EXIT_USAGE and "missing" in err, err)

        dewarped = test_dir / "dewarped.jsonl"
        code, _, _ = run("dewarp", walks, "--m", 12, "--output", dewarped)
        resampled = data.load_dataset(dewarped)
        check("dewarp keeps ids", code == EXIT_OK and resampled.ids == generated.ids)
        check("dewarp resamples to m", all(e.series.n == 12 for e in resampled))
        code, _, _ = run("dewarp", walks, "--output", test_dir / "one.csv", "--output-format", "csv-single")
        check("dewarp honours csv-single limit", code == EXIT_USAGE)

        # --- Test 3: experiments ---
        print("\n[3] sanity / bench-*")
        sanity_out = test_dir / "sanity.csv"
        code, _, err = run("sanity", "--k", 1, "--n", 8, "--trials", 2, "--multistart", 2, "--workers", 1, "--output", sanity_out)
        lines = sanity_out.read_text(encoding="utf-8").splitlines()
        check("sanity exits 0", code == EXIT_OK, err)
        check("sanity report starts with schema", lines[0] == "# schema=1" and lines[1].startswith("trial_id,k,n,value"))
        check("sanity rows", len(lines) == 4)
        check("summary on stderr", "sanity: {" in err)

        code, out, err = run("bench-tightness", "--k", 1, "--n", 8, "--pairs", 2, "--workers", 1)
        lines = out.splitlines()
        check("tightness exits 0", code == EXIT_OK, err)
        check("tightness to stdout", lines[0] == "# schema=1" and len(lines) == 4, out)
        code, out, err = run("bench-tightness", "--dataset", walks, "--limit", 3, "--multistart", 2, "--workers", 2)
        check("tightness on a dataset", code == EXIT_OK and len(out.splitlines()) == 5, out)
        code, out, err = run("bench-speedup", "--k", 2, "--n", 8, "--pairs", 1, "--repetitions", 1, "--multistart", 2)
        check("speedup exits 0", code == EXIT_OK and "speedup_fast_delta" in out.splitlines()[1], err)
        code, out, err = run("bench-scaling", "--lengths", 16, 32, "--runs", 2)
        check("scaling exits 0", code == EXIT_OK and len(out.splitlines()) == 4, err)

        # an optimizer stuck at 0 makes every nonzero approximation exceed it
        real_upper = bench.congruence_upper
        bench.congruence_upper = lambda s, t, cfg=None: OptimizerResult(0.0, core.Isometry.identity(s.k), 1, True, 0.0)
        try:
            code, out, err = run("bench-tightness", "--k", 2, "--n", 8, "--pairs", 2, "--workers", 1)
            check("tightness violation exits 1", code == EXIT_VIOLATION, err)
            check("violation still writes the report", out.splitlines()[0] == "# schema=1" and "True" in out, out)
            code, out, err = run("bench-speedup", "--k", 2, "--n", 8, "--pairs", 1, "--repetitions", 1)
            check("speedup violation exits 1", code == EXIT_VIOLATION, err)
        finally:
            bench.congruence_upper = real_upper

        # --- Test 4: query ---
        print("\n[4] query")
        code, out, err = run("query", "--dataset", walks, "--query-id", "walk-0000", "--knn", 2, "--multistart", 2)
        lines = out.splitlines()
        check("knn exits 0", code == EXIT_OK, err)
        check("knn returns k rows", lines[1] == "id,label,lower_bound,distance" and len(lines) == 4, out)
        check("query excludes itself", all(not line.startswith("walk-0000,") for line in lines[2:]))
        code, out, _ = run("query", "--dataset", walks, "--query-file", walks, "--epsilon", 0.0, "--multistart", 2)
        check("range query with the query in the dataset", code == EXIT_OK and "walk-0000" in out, out)
        code, _, _ = run("query", "--dataset", walks, "--knn", 2)
        check("query without a query series rejected", code == EXIT_USAGE)
        code, _, _ = run("query", "--dataset", walks, "--query-id", "walk-0000", "--knn", 2, "--epsilon", 1.0)
        check("knn and epsilon are exclusive", code == EXIT_USAGE)

        # --- Test 5: errors and help ---
        print("\n[5] Errors / help")
        code, _, err = run("dist", test_dir / "nope.csv", t_path)
        check("missing file exits 2", code == EXIT_USAGE and "not found" in err, err)
        code, _, _ = run("dist")
        check("missing arguments exit 2", code == EXIT_USAGE)
        code, _, _ = run("frobnicate")
        check("unknown command exits 2", code == EXIT_USAGE)
        code, out, _ = run("--help")
        check("--help exits 0", code == EXIT_OK and "bench-tightness" in out)
        bad_config = test_dir / "bad.yaml"
        bad_config.write_text("optimizer:\n  method: bfgs\n", encoding="utf-8")
        code, _, err = run("sanity", "--config", bad_config, "--k", 1, "--n", 8, "--trials", 1)
        check("invalid config exits 2", code == EXIT_USAGE and "bfgs" in err, err)

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


def test_cli():
    assert run_tests() == 0


if __name__ == "__main__":
    sys.exit(run_tests())
