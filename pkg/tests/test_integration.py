#!/usr/bin/env python3
"""Full-size runs of the optimizer on congruent pairs and against the 2-D oracle.

Slow (several minutes); the per-module scripts cover the same code at desk size.
"""

import sys
from pathlib import Path

# Add the repo root to path so the package imports without installation
REPO_DIR = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO_DIR))

from tscongruence import approx, congruence, core  # noqa: E402
from tscongruence.config import ExperimentConfig  # noqa: E402
from tscongruence.congruence import OptimizerConfig  # noqa: E402

# Track test results
passed = 0
failed = 0

CONGRUENT_RUNS = 200
ORACLE_PAIRS = 50


def check(name, condition, detail=""):
    global passed, failed
    if condition:
        print(f"  PASS: {name}")
        passed += 1
    else:
        print(f"  FAIL: {name} — {detail}")
        failed += 1


def run_tests():
    global passed, failed

    print("\n=== Integration Tests ===\n")

    # --- Test 1: Congruent pairs ---
    print(f"[1] {CONGRUENT_RUNS} congruent pairs, k <= 3, n <= 64")
    limit = ExperimentConfig().reasonable_value_limit
    worst_bound = 0.0
    solved = 0
    kept = 0
    for run in range(CONGRUENT_RUNS):
        k = 1 + run % 3
        n = (8, 16, 32, 64)[(run // 3) % 4]
        t = core.random_series(n, k, seed=10_000 + run)
        s = core.apply_isometry(t, core.random_isometry(k, seed=20_000 + run, translation_scale=2.0))
        worst_bound = max(worst_bound, max(func(t, s) for func in approx.APPROXIMATIONS.values()))
        value = congruence.congruence_upper(s, t, OptimizerConfig(seed=run)).value
        if value > limit:
            continue
        kept += 1
        if value <= 1e-3:
            solved += 1
        else:
            print(f"    run {run} (k={k}, n={n}): value {value:.3e}")
    check("all four approximations vanish on (T, g(T))", worst_bound <= 1e-9, f"worst={worst_bound:.3e}")
    check(">= 90% solved to <= 1e-3", kept > 0 and solved >= 0.9 * kept, f"{solved}/{kept}")

    # --- Test 2: Optimizer against the grid oracle ---
    print(f"\n[2] {ORACLE_PAIRS} random pairs against congruence_oracle_2d")
    cfg = OptimizerConfig(multistart_count=8, seed=0)
    worst = 0.0
    for pair in range(ORACLE_PAIRS):
        k = 1 + pair % 2
        n = (8, 12, 16)[(pair // 2) % 3]
        s = core.random_series(n, k, seed=30_000 + pair)
        t = core.random_series(n, k, seed=40_000 + pair)
        upper = congruence.congruence_upper(s, t, cfg).value
        oracle = congruence.congruence_oracle_2d(s, t, 3600)
        worst = max(worst, abs(upper - oracle))
    check("|upper - oracle| <= 1e-2", worst <= 1e-2, f"worst={worst:.3e}")

    # --- Summary ---
    print(f"\n{'=' * 40}")
    print(f"Results: {passed} passed, {failed} failed, {passed + failed} total")
    if failed > 0:
        print("SOME TESTS FAILED!")
        return 1
    else:
        print("ALL TESTS PASSED!")
        return 0


def test_integration():
    assert run_tests() == 0


if __name__ == "__main__":
    sys.exit(run_tests())
