"""
Lower bounds on the congruence distance, plus the DTW baseline.

All four approximations compare self-similarity matrices, which do not
change under rotation, mirroring or translation:

- delta_distance:             half the largest wrapped-diagonal L1 sum of |ΔS − ΔT|
- fast_delta_distance:        same, offsets restricted to powers of two
- greedy_delta_distance:      greedy index-disjoint selection of |ΔS − ΔT| entries
- fast_greedy_delta_distance: same, pairs restricted to j = i + 2^m

Each is ≤ f(M, v) = Σ d(s_i, M·t_i + v) for every isometry, hence ≤ the
congruence distance. The delta distance also satisfies the triangle
inequality. The fast variants never materialize the n×n matrices.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.spatial.distance import cdist, pdist

try:
    from .core import SelfSimMatrix, TimeSeries, check_same_shape
except ImportError:
    from core import SelfSimMatrix, TimeSeries, check_same_shape  # type: ignore[no-redef]

logger = logging.getLogger(__name__)

# Upper bound on offsets × n × k floats gathered per chunk
_CHUNK_ELEMENTS = 1 << 20


@dataclass(frozen=True)
class ScoredPair:
    """One entry d_{i,j} = |d(s_i,s_j) − d(t_i,t_j)| of |ΔS − ΔT|, with i < j."""

    i: int
    j: int
    score: float

    def __post_init__(self) -> None:
        if not 0 <= self.i < self.j:
            raise ValueError(f"ScoredPair needs 0 <= i < j, got ({self.i}, {self.j})")
        if self.score < 0:
            raise ValueError(f"ScoredPair score must be >= 0, got {self.score}")


def power_of_two_offsets(n: int) -> NDArray[np.intp]:
    """Offsets 1, 2, 4, ... strictly below n."""
    offsets: list[int] = []
    step = 1
    while step < n:
        offsets.append(step)
        step *= 2
    return np.asarray(offsets, dtype=np.intp)


def _offset_distances(points: NDArray[np.float64], offsets: NDArray[np.intp]) -> NDArray[np.float64]:
    """(len(offsets), n) array of d(p_i, p_{(i+δ)%n})."""
    n = points.shape[0]
    idx = (np.arange(n)[None, :] + offsets[:, None]) % n
    return np.asarray(np.linalg.norm(points[idx] - points[None, :, :], axis=2), dtype=np.float64)


def _matrix_offsets(delta: SelfSimMatrix, offsets: NDArray[np.intp]) -> NDArray[np.float64]:
    n = delta.n
    rows = np.arange(n)[None, :]
    return delta.entries[rows, (rows + offsets[:, None]) % n]


def diagonal_sums(
    s: TimeSeries,
    t: TimeSeries,
    offsets: NDArray[np.intp] | None = None,
    *,
    delta_s: SelfSimMatrix | None = None,
    delta_t: SelfSimMatrix | None = None,
) -> NDArray[np.float64]:
    """Σ_i |ΔS_{i,(i+δ)%n} − ΔT_{i,(i+δ)%n}| for each offset δ (default 1..n-1).

    Precomputed self-similarity matrices are used when both are given;
    otherwise the needed distances are computed from the points in chunks.
    """
    check_same_shape(s, t)
    n = s.n
    if offsets is None:
        offsets = np.arange(1, n, dtype=np.intp)
    offsets = np.asarray(offsets, dtype=np.intp)
    sums = np.empty(offsets.shape[0], dtype=np.float64)
    if offsets.shape[0] == 0:
        return sums

    matrices: tuple[SelfSimMatrix, SelfSimMatrix] | None = None
    if delta_s is not None and delta_t is not None:
        if delta_s.n != n or delta_t.n != n:
            raise ValueError("Precomputed self-similarity matrices do not match the series length")
        matrices = (delta_s, delta_t)

    chunk = max(1, _CHUNK_ELEMENTS // (n * s.k))
    for start in range(0, offsets.shape[0], chunk):
        block = offsets[start : start + chunk]
        if matrices is not None:
            ds = _matrix_offsets(matrices[0], block)
            dt = _matrix_offsets(matrices[1], block)
        else:
            ds = _offset_distances(s.points, block)
            dt = _offset_distances(t.points, block)
        sums[start : start + block.shape[0]] = np.abs(ds - dt).sum(axis=1)
    return sums


def delta_distance(
    s: TimeSeries,
    t: TimeSeries,
    *,
    delta_s: SelfSimMatrix | None = None,
    delta_t: SelfSimMatrix | None = None,
) -> float:
    """Half the maximum wrapped-diagonal sum over all offsets 0 < δ < n."""
    check_same_shape(s, t)
    if s.n == 1:
        return 0.0
    return 0.5 * float(diagonal_sums(s, t, delta_s=delta_s, delta_t=delta_t).max())


def fast_delta_distance(s: TimeSeries, t: TimeSeries) -> float:
    """delta_distance with δ restricted to powers of two; O(n log n) distances."""
    check_same_shape(s, t)
    if s.n == 1:
        return 0.0
    return 0.5 * float(diagonal_sums(s, t, power_of_two_offsets(s.n)).max())


def _all_pairs(s: TimeSeries, t: TimeSeries) -> tuple[NDArray[np.intp], NDArray[np.intp], NDArray[np.float64]]:
    # pdist's condensed order is the row-major order of triu_indices(n, 1)
    i, j = np.triu_indices(s.n, 1)
    scores = np.abs(pdist(s.points) - pdist(t.points))
    return i.astype(np.intp), j.astype(np.intp), scores


def _power_of_two_pairs(
    s: TimeSeries, t: TimeSeries
) -> tuple[NDArray[np.intp], NDArray[np.intp], NDArray[np.float64]]:
    rows: list[NDArray[np.intp]] = []
    cols: list[NDArray[np.intp]] = []
    scores: list[NDArray[np.float64]] = []
    for offset in power_of_two_offsets(s.n).tolist():
        i = np.arange(s.n - offset, dtype=np.intp)
        j = i + offset
        ds = np.linalg.norm(s.points[j] - s.points[i], axis=1)
        dt = np.linalg.norm(t.points[j] - t.points[i], axis=1)
        rows.append(i)
        cols.append(j)
        scores.append(np.abs(ds - dt))
    if not rows:
        empty = np.empty(0, dtype=np.intp)
        return empty, empty, np.empty(0, dtype=np.float64)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(scores)


def _select_disjoint(
    n: int, i: NDArray[np.intp], j: NDArray[np.intp], scores: NDArray[np.float64]
) -> list[ScoredPair]:
    """Greedy pass over pairs by descending score, ties by ascending (i, j).

    Each index is used at most once. Zero scores are never selected since
    they cannot change the sum.
    """
    order = np.lexsort((j, i, -scores))
    used = [False] * n
    remaining = n
    selected: list[ScoredPair] = []
    score_list = scores[order].tolist()
    i_list = i[order].tolist()
    j_list = j[order].tolist()
    for score, ia, ja in zip(score_list, i_list, j_list):
        if score <= 0.0 or remaining < 2:
            break
        if used[ia] or used[ja]:
            continue
        used[ia] = used[ja] = True
        remaining -= 2
        selected.append(ScoredPair(ia, ja, score))
    return selected


def greedy_selection(s: TimeSeries, t: TimeSeries, *, fast: bool = False) -> list[ScoredPair]:
    """The index-disjoint pairs summed by the (fast) greedy delta distance."""
    check_same_shape(s, t)
    if s.n == 1:
        return []
    i, j, scores = _power_of_two_pairs(s, t) if fast else _all_pairs(s, t)
    return _select_disjoint(s.n, i, j, scores)


def greedy_delta_distance(s: TimeSeries, t: TimeSeries) -> float:
    """Greedy sum over index-disjoint entries of |ΔS − ΔT|, all pairs i < j."""
    return float(sum(pair.score for pair in greedy_selection(s, t)))


def fast_greedy_delta_distance(s: TimeSeries, t: TimeSeries) -> float:
    """Greedy sum restricted to pairs (i, i + 2^m) with i + 2^m <= n - 1."""
    return float(sum(pair.score for pair in greedy_selection(s, t, fast=True)))


def _dtw_grid(s: TimeSeries, t: TimeSeries) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    check_same_shape(s, t, same_length=False)
    cost = cdist(s.points, t.points, metric="euclidean")
    rows, cols = cost.shape
    grid = np.full((rows + 1, cols + 1), np.inf)
    grid[0, 0] = 0.0
    for a in range(rows):
        row_cost = cost[a]
        prev = grid[a]
        cur = grid[a + 1]
        for b in range(cols):
            cur[b + 1] = row_cost[b] + min(prev[b], prev[b + 1], cur[b])
    return cost, grid


def dtw_distance(s: TimeSeries, t: TimeSeries) -> float:
    """Dynamic time warping with Euclidean local cost; lengths may differ."""
    _, grid = _dtw_grid(s, t)
    return float(grid[-1, -1])


def dtw_path(s: TimeSeries, t: TimeSeries) -> tuple[float, list[tuple[int, int]]]:
    """DTW distance plus the aligned index pairs from (0, 0) to (n-1, m-1)."""
    _, grid = _dtw_grid(s, t)
    a, b = s.n, t.n
    path = [(a - 1, b - 1)]
    while (a, b) != (1, 1):
        candidates = [
            (grid[a - 1, b - 1], a - 1, b - 1),
            (grid[a - 1, b], a - 1, b),
            (grid[a, b - 1], a, b - 1),
        ]
        _, a, b = min(candidates, key=lambda c: c[0])
        path.append((a - 1, b - 1))
    path.reverse()
    return float(grid[-1, -1]), path


# Registry used by the CLI and the benchmark harness
APPROXIMATIONS = {
    "delta": delta_distance,
    "fast-delta": fast_delta_distance,
    "greedy": greedy_delta_distance,
    "fast-greedy": fast_greedy_delta_distance,
}
