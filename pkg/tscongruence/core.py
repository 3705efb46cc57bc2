"""
Core geometry for congruence measures.

Points, time series, orthogonal matrices, isometries and self-similarity
matrices. Every other module builds on these types; all of them are
immutable after construction and safe to share between threads.

A time series is stored as an (n, k) float64 array: n points in k dimensions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial.distance import pdist, squareform

logger = logging.getLogger(__name__)

# Max Frobenius norm of M·Mᵀ − I accepted for an isometry
ORTHOGONALITY_TOLERANCE = 1e-9


class DimensionMismatchError(ValueError):
    """Two inputs disagree in length or dimension."""


def _frozen(array: NDArray[np.float64]) -> NDArray[np.float64]:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Ordered sequence of n points in k-dimensional real space.

    Accepts anything numpy can turn into a 2-D float array. A flat sequence
    of numbers is read as a 1-D series (n points, k = 1).
    """

    points: NDArray[np.float64]

    def __post_init__(self) -> None:
        try:
            array = np.array(self.points, dtype=np.float64)
        except (TypeError, ValueError) as e:
            raise ValueError(f"Points must be real vectors of identical dimension: {e}") from e
        if array.ndim == 1:
            array = array.reshape(-1, 1)
        if array.ndim != 2:
            raise ValueError(f"Points must form an (n, k) array, got shape {array.shape}")
        if array.shape[0] < 1 or array.shape[1] < 1:
            raise ValueError(f"A time series needs n >= 1 points of dimension k >= 1, got shape {array.shape}")
        if not np.all(np.isfinite(array)):
            raise ValueError("Time series contains non-finite coordinates")
        object.__setattr__(self, "points", _frozen(array))

    @property
    def n(self) -> int:
        return int(self.points.shape[0])

    @property
    def k(self) -> int:
        return int(self.points.shape[1])

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return bool(np.array_equal(self.points, other.points))

    __hash__ = object.__hash__

    def projection(self, j: int) -> NDArray[np.float64]:
        """The j-th coordinate of every point (the series S^j)."""
        if not 0 <= j < self.k:
            raise IndexError(f"Dimension index {j} out of range for k={self.k}")
        return self.points[:, j]

    def to_list(self) -> list[list[float]]:
        return [[float(x) for x in row] for row in self.points]

    def __repr__(self) -> str:
        return f"TimeSeries(n={self.n}, k={self.k})"


@dataclass(frozen=True, eq=False)
class SelfSimMatrix:
    """n×n matrix of pairwise Euclidean distances within one series."""

    entries: NDArray[np.float64]

    def __post_init__(self) -> None:
        array = np.array(self.entries, dtype=np.float64)
        if array.ndim != 2 or array.shape[0] != array.shape[1]:
            raise ValueError(f"Self-similarity matrix must be square, got shape {array.shape}")
        object.__setattr__(self, "entries", _frozen(array))

    @property
    def n(self) -> int:
        return int(self.entries.shape[0])

    def __getitem__(self, index: tuple[int, int]) -> float:
        return float(self.entries[index])

    def diagonal_wrapped(self, offset: int) -> NDArray[np.float64]:
        """Entries (i, (i + offset) % n) for i = 0..n-1."""
        rows = np.arange(self.n)
        return self.entries[rows, (rows + offset) % self.n]


@dataclass(frozen=True, eq=False)
class Isometry:
    """Orthogonal matrix M plus translation v, acting as t -> M·t + v."""

    rotation: NDArray[np.float64]
    translation: NDArray[np.float64]

    def __post_init__(self) -> None:
        m = np.array(self.rotation, dtype=np.float64)
        v = np.array(self.translation, dtype=np.float64).reshape(-1)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"Rotation must be a square matrix, got shape {m.shape}")
        if v.shape[0] != m.shape[0]:
            raise DimensionMismatchError(f"Translation dimension {v.shape[0]} != rotation dimension {m.shape[0]}")
        residual = orthogonality_residual(m)
        if residual > ORTHOGONALITY_TOLERANCE:
            raise ValueError(f"Matrix is not orthogonal: ||M·Mᵀ − I||_F = {residual:.3e}")
        det = float(np.linalg.det(m))
        if abs(abs(det) - 1.0) > ORTHOGONALITY_TOLERANCE:
            raise ValueError(f"Orthogonal matrix has determinant {det!r}, expected ±1")
        object.__setattr__(self, "rotation", _frozen(m))
        object.__setattr__(self, "translation", _frozen(v))

    @classmethod
    def identity(cls, k: int) -> Isometry:
        return cls(np.eye(k), np.zeros(k))

    @property
    def k(self) -> int:
        return int(self.rotation.shape[0])

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.rotation))

    def apply(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        """Map an (n, k) point array row-wise."""
        return np.asarray(points @ self.rotation.T + self.translation, dtype=np.float64)

    def to_dict(self) -> dict[str, Any]:
        return {
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
            "determinant": self.determinant,
        }


def as_series(value: TimeSeries | ArrayLike) -> TimeSeries:
    """Return value unchanged if it already is a TimeSeries, else wrap it."""
    if isinstance(value, TimeSeries):
        return value
    return TimeSeries(np.asarray(value, dtype=np.float64))


def check_same_shape(s: TimeSeries, t: TimeSeries, *, same_length: bool = True) -> None:
    """Raise DimensionMismatchError unless s and t are comparable."""
    if s.k != t.k:
        raise DimensionMismatchError(f"Dimension mismatch: {s.k} != {t.k}")
    if same_length and s.n != t.n:
        raise DimensionMismatchError(f"Length mismatch: {s.n} != {t.n}")


def orthogonality_residual(matrix: ArrayLike) -> float:
    """Frobenius norm of M·Mᵀ − I."""
    m = np.asarray(matrix, dtype=np.float64)
    return float(np.linalg.norm(m @ m.T - np.eye(m.shape[0]), ord="fro"))


def euclid(a: ArrayLike, b: ArrayLike) -> float:
    """Euclidean distance between two vectors of equal dimension."""
    va = np.atleast_1d(np.asarray(a, dtype=np.float64))
    vb = np.atleast_1d(np.asarray(b, dtype=np.float64))
    if va.ndim != 1 or vb.ndim != 1:
        raise ValueError("euclid expects two vectors")
    if va.shape != vb.shape:
        raise DimensionMismatchError(f"Dimension mismatch: {va.shape[0]} != {vb.shape[0]}")
    return float(np.linalg.norm(va - vb))


def self_similarity(series: TimeSeries) -> SelfSimMatrix:
    """All pairwise point distances of a series.

    Only the upper triangle is computed and then mirrored, so the result is
    exactly symmetric with an exactly zero diagonal.
    """
    if series.n == 1:
        return SelfSimMatrix(np.zeros((1, 1)))
    return SelfSimMatrix(squareform(pdist(series.points, metric="euclidean")))


def apply_isometry(series: TimeSeries, g: Isometry) -> TimeSeries:
    """Transform every point of a series: t_i -> M·t_i + v."""
    if g.k != series.k:
        raise DimensionMismatchError(f"Isometry dimension {g.k} != series dimension {series.k}")
    return TimeSeries(g.apply(series.points))


def random_orthogonal(k: int, seed: int) -> NDArray[np.float64]:
    """Seeded random k×k orthogonal matrix.

    A Gaussian matrix is orthonormalized by QR (signs fixed by the diagonal
    of R), then a seed-derived coin flip negates the first column so both
    determinant signs occur across seeds.
    """
    if k < 1:
        raise ValueError(f"Dimension must be >= 1, got {k}")
    rng = np.random.default_rng(seed)
    gaussian = rng.standard_normal((k, k))
    q, r = np.linalg.qr(gaussian)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    q = q * signs
    if rng.integers(2) == 1:
        q[:, 0] = -q[:, 0]
    return np.asarray(q, dtype=np.float64)


def random_isometry(k: int, seed: int, translation_scale: float = 1.0) -> Isometry:
    """random_orthogonal plus a Gaussian translation of the given scale."""
    rotation = random_orthogonal(k, seed)
    rng = np.random.default_rng([seed, k])
    return Isometry(rotation, rng.normal(0.0, translation_scale, size=k))


def random_series(n: int, k: int, seed: int, low: float = -1.0, high: float = 1.0) -> TimeSeries:
    """Seeded series with coordinates drawn uniformly from [low, high)."""
    rng = np.random.default_rng(seed)
    return TimeSeries(rng.uniform(low, high, size=(n, k)))

