#!/usr/bin/env python3
"""Unit tests for filter-and-refine similarity queries."""

import sys
from pathlib import Path

# Add the repo root to path so the package imports without installation
REPO_DIR = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO_DIR))

from tscongruence import core, search  # noqa: E402
from tscongruence.congruence import OptimizerConfig, congruence_upper  # noqa: E402
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


def run_tests():
    global passed, failed

    print("\n=== Search Tests ===\n")

    opt_cfg = OptimizerConfig(multistart_count=3, seed=2)
    query = generate_walk(WalkParams(2, 12, seed=500))
    entries = [DatasetEntry(f"walk-{i:02d}", generate_walk(WalkParams(2, 12, seed=i)), "walk") for i in range(8)]
    entries.append(DatasetEntry("copy", core.apply_isometry(query, core.random_isometry(2, seed=77)), "copy"))
    entries.append(DatasetEntry("short", generate_walk(WalkParams(2, 9, seed=99)), "walk"))
    dataset = Dataset(entries)

    brute = sorted(
        (congruence_upper(query, e.series, opt_cfg).value, e.id) for e in entries if e.series.n == query.n
    )

    # --- Test 1: k nearest neighbours ---
    print("[1] knn_query")
    matches, stats = search.knn_query(query, dataset, 1, opt_cfg=opt_cfg)
    check("congruent copy is nearest", matches[0].id == "copy", str(matches))
    check("copy distance near zero", matches[0].distance <= 1e-3, str(matches[0].distance))
    check("label carried", matches[0].label == "copy")
    check("wrong-length entry skipped", stats.skipped == 1 and stats.candidates == 9)
    check("refined + pruned covers candidates", stats.refined + stats.pruned == stats.candidates, str(stats))

    for bound in ("delta", "fast-delta", "greedy", "fast-greedy"):
        top, _ = search.knn_query(query, dataset, 3, bound=bound, opt_cfg=opt_cfg)
        check(f"{bound}: top 3 match brute force", [m.id for m in top] == [i for _, i in brute[:3]], str(top))
    top, _ = search.knn_query(query, dataset, 3, opt_cfg=opt_cfg)
    check("results sorted by distance", all(a.distance <= b.distance for a, b in zip(top, top[1:])))
    check("lower bound below distance", all(m.lower_bound <= m.distance + 1e-9 for m in top))
    everything, stats = search.knn_query(query, dataset, 20, opt_cfg=opt_cfg)
    check("k above dataset size returns all candidates", len(everything) == 9 and stats.pruned == 0)

    # --- Test 2: Range queries ---
    print("\n[2] range_query")
    epsilon = (brute[2][0] + brute[3][0]) / 2.0
    within, stats = search.range_query(query, dataset, epsilon, opt_cfg=opt_cfg)
    check("range matches brute force", [m.id for m in within] == [i for _, i in brute[:3]], str(within))
    check("every match within epsilon", all(m.distance <= epsilon for m in within))
    check("refined + pruned covers candidates", stats.refined + stats.pruned == stats.candidates)
    refined_bounds = []
    real_upper = search.congruence_upper

    def counting_upper(s, t, cfg=None):
        refined_bounds.append(search.APPROXIMATIONS["greedy"](s, t))
        return real_upper(s, t, cfg)

    search.congruence_upper = counting_upper
    try:
        _, stats = search.range_query(query, dataset, epsilon, opt_cfg=opt_cfg)
    finally:
        search.congruence_upper = real_upper
    check("optimizer runs once per refined candidate", len(refined_bounds) == stats.refined)
    check("nothing above epsilon is refined", all(b <= epsilon for b in refined_bounds), str(refined_bounds))
    zero, _ = search.range_query(query, dataset, 0.0, opt_cfg=opt_cfg)
    check("epsilon 0 finds no random walk", all(m.id == "copy" for m in zero))

    # --- Test 3: Invalid arguments ---
    print("\n[3] Errors")
    check("k=0 raises", raises(ValueError, search.knn_query, query, dataset, 0))
    check("negative epsilon raises", raises(ValueError, search.range_query, query, dataset, -1.0))
    check("unknown bound raises", raises(ValueError, search.knn_query, query, dataset, 1, "dtw"))
    empty, stats = search.knn_query(generate_walk(WalkParams(3, 12, seed=1)), dataset, 2)
    check("no candidate of matching shape", empty == [] and stats.skipped == 10)

    # --- Summary ---
    print(f"\n{'=' * 40}")
    print(f"Results: {passed} passed, {failed} failed, {passed + failed} total")
    if failed > 0:
        print("SOME TESTS FAILED!")
        return 1
    else:
        print("ALL TESTS PASSED!")
        return 0


def test_search():
    assert run_tests() == 0


if __name__ == "__main__":
    sys.exit(run_tests())
