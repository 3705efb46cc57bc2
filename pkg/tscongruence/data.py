"""
Synthetic walks, arc-length dewarping and dataset files.

Two on-disk formats:

- csv-single:        one series per file, header dim0..dim{k-1}, one row per point
- jsonl-collection:  one {"id", "label", "points"} object per line

Both round-trip every float64 coordinate bit-exactly. Writes go through a
temporary file and os.replace so a crash never leaves a half-written file.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import warnings
from collections.abc import Iterator
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from numpy.typing import NDArray
from scipy.optimize import brentq
from scipy.sparse import csc_matrix
from scipy.sparse.linalg import MatrixRankWarning, spsolve

try:
    from .core import TimeSeries
except ImportError:
    from core import TimeSeries  # type: ignore[no-redef]

logger = logging.getLogger(__name__)


class SeriesFormat(Enum):
    CSV_SINGLE = "csv-single"
    JSONL_COLLECTION = "jsonl-collection"

    @classmethod
    def for_path(cls, path: Path) -> SeriesFormat:
        """Infer the format from a file extension (.csv or .jsonl/.json)."""
        suffix = path.suffix.lower()
        if suffix == ".csv":
            return cls.CSV_SINGLE
        if suffix in (".jsonl", ".json"):
            return cls.JSONL_COLLECTION
        raise ValueError(f"Cannot infer series format from extension {suffix!r}; pass the format explicitly")


class DatasetFormatError(ValueError):
    """A dataset file could not be parsed."""

    def __init__(self, message: str, path: Path | str, line_number: int | None = None) -> None:
        self.path = Path(path)
        self.line_number = line_number
        where = f"{self.path}:{line_number}" if line_number is not None else str(self.path)
        super().__init__(f"{where}: {message}")


# --- Synthetic data ----------------------------------------------------------


@dataclass(frozen=True)
class WalkParams:
    """Parameters of a smoothed Gaussian random walk.

    Stand-in for an unspecified trajectory generator; shapes of results are
    comparable, exact numbers are not.
    """

    k: int
    n: int
    step_scale: float = 1.0
    smoothing_window: int = 3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"Walk dimension must be >= 1, got {self.k}")
        if self.n < 2:
            raise ValueError(f"Walk length must be >= 2, got {self.n}")
        if self.step_scale < 0 or not math.isfinite(self.step_scale):
            raise ValueError(f"step_scale must be finite and >= 0, got {self.step_scale}")
        if self.smoothing_window < 1:
            raise ValueError(f"smoothing_window must be >= 1, got {self.smoothing_window}")


def generate_walk(params: WalkParams) -> TimeSeries:
    """Cumulative sum of seeded Gaussian steps, then a moving average.

    n + window − 1 raw points are drawn so the valid moving average has
    exactly n points.
    """
    rng = np.random.default_rng(params.seed)
    window = params.smoothing_window
    steps = rng.normal(0.0, params.step_scale, size=(params.n + window - 1, params.k))
    walk = np.cumsum(steps, axis=0)
    smoothed = sliding_window_view(walk, window, axis=0).mean(axis=-1)
    return TimeSeries(smoothed)


# --- Dewarping ---------------------------------------------------------------


def _segments(points: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Polyline vertices with zero-length segments dropped, and segment lengths."""
    lengths = np.linalg.norm(np.diff(points, axis=0), axis=1)
    keep = np.concatenate([[True], lengths > 0])
    vertices = points[keep]
    return vertices, np.linalg.norm(np.diff(vertices, axis=0), axis=1)


def _chord_march(
    vertices: NDArray[np.float64],
    lengths: NDArray[np.float64],
    h: float,
    steps: int,
) -> tuple[list[NDArray[np.float64]], float]:
    """Walk the polyline placing each point at Euclidean distance h from the previous.

    Each new point is the first point along the polyline at distance h.
    Returns the placed points (start included) and a residual that is
    negative while the march ends before the last vertex and positive when
    it runs out of polyline. The residual jumps wherever a chord leaves the
    polyline exactly at a vertex, so it need not have a root.
    """
    total = float(lengths.sum())
    cumulative = np.concatenate([[0.0], np.cumsum(lengths)])
    placed = [vertices[0]]
    segment, u, arc = 0, 0.0, 0.0
    for done in range(steps):
        p = placed[-1]
        found = False
        fresh = False
        while segment < lengths.shape[0]:
            a, b = vertices[segment], vertices[segment + 1]
            e = b - a
            ee = float(e @ e)
            d = a - p
            de = float(d @ e)
            c = float(d @ d) - h * h
            if fresh and c >= 0.0:
                # crossing fell on the shared vertex up to rounding
                root = 0.0
            else:
                root = (-de + math.sqrt(max(de * de - ee * c, 0.0))) / ee
            if u <= root <= 1.0:
                u = root
                arc = float(cumulative[segment]) + u * float(lengths[segment])
                placed.append(a + u * e)
                found = True
                break
            segment += 1
            u = 0.0
            fresh = True
        if not found:
            remaining = steps - done
            return placed, remaining * h - float(np.linalg.norm(vertices[-1] - p))
    return placed, arc - total


def _chords_equal(points: NDArray[np.float64], total: float) -> bool:
    chords = np.linalg.norm(np.diff(points, axis=0), axis=1)
    return bool(np.ptp(chords) <= 1e-10 * total)


def _march_chords(vertices: NDArray[np.float64], lengths: NDArray[np.float64], steps: int) -> NDArray[np.float64] | None:
    """Equal chords from a brentq root of the march residual, or None if the root is a jump."""
    total = float(lengths.sum())
    upper = total / steps

    def residual(h: float) -> float:
        return _chord_march(vertices, lengths, h, steps)[1]

    if residual(upper) <= 0.0:
        h = upper
    else:
        try:
            h = float(brentq(residual, upper * 1e-9, upper, xtol=1e-15 * total, maxiter=200))
        except (ValueError, RuntimeError) as e:
            logger.debug("Chord march root search failed: %s", e)
            return None

    placed, _ = _chord_march(vertices, lengths, h, steps)
    if len(placed) < steps + 1:
        placed.append(vertices[-1])
    out = np.array(placed[: steps + 1])
    out[-1] = vertices[-1]
    return out if _chords_equal(out, total) else None


class _Polyline:
    """Arc-length parameterization of a polyline without zero-length segments.

    Coordinates are kept relative to the first vertex so rounding scales with
    the extent of the path, not with its offset from the origin.
    """

    def __init__(self, vertices: NDArray[np.float64], lengths: NDArray[np.float64]) -> None:
        self.origin = vertices[0]
        self.vertices = vertices - self.origin
        self.cumulative = np.concatenate([[0.0], np.cumsum(lengths)])
        self.total = float(self.cumulative[-1])
        self.units = np.diff(vertices, axis=0) / lengths[:, None]
        self.last = lengths.shape[0] - 1

    def at(self, s: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Relative points and unit tangents at arc positions s, extended linearly past both ends."""
        index = np.clip(np.searchsorted(self.cumulative, s, side="right") - 1, 0, self.last)
        offsets = s - self.cumulative[index]
        return self.vertices[index] + offsets[:, None] * self.units[index], self.units[index]


def _chord_residuals(
    line: _Polyline, z: NDArray[np.float64]
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]] | None:
    """Chord errors |x(s_{i+1}) - x(s_i)| - h at z = (h, s_1, ..., s_steps), s_0 = 0.

    Also returns each unit chord dotted with the tangent at its far end (d)
    and at its near end (n). None when two consecutive points coincide.
    """
    x, tangents = line.at(np.concatenate([[0.0], z[1:]]))
    chords = np.diff(x, axis=0)
    norms = np.linalg.norm(chords, axis=1)
    if not np.all(norms > 0.0):
        return None
    units = chords / norms[:, None]
    d = np.einsum("ij,ij->i", units, tangents[1:])
    n = np.einsum("ij,ij->i", units, tangents[:-1])
    return norms - z[0], d, n


def _chord_tangent(d: NDArray[np.float64], n: NDArray[np.float64]) -> NDArray[np.float64] | None:
    """Unit tangent of the equal-chord curve at a chain.

    The chord equations differentiate to d_i ds_{i+1} = n_i ds_i + dh.
    Scaling every component by the product of the d_i removes the divisions,
    so the field stays finite and keeps its orientation through folds where
    a chord meets the polyline tangentially and h turns back.
    """
    steps = d.shape[0]
    prefix = np.concatenate([[1.0], np.cumprod(d)])
    suffix = np.concatenate([np.cumprod(d[::-1])[::-1], [1.0]])
    q = np.empty(steps)
    q[0] = 1.0
    for i in range(1, steps):
        q[i] = n[i] * q[i - 1] + prefix[i]
    tangent = np.concatenate([[prefix[steps]], suffix[1:] * q])
    norm = float(np.linalg.norm(tangent))
    if not (norm > 0.0 and math.isfinite(norm)):
        return None
    return tangent / norm


def _chord_jacobian(d: NDArray[np.float64], n: NDArray[np.float64]) -> csc_matrix:
    steps = d.shape[0]
    rows = np.arange(steps)
    values = np.concatenate([-np.ones(steps), d, -n[1:]])
    row_index = np.concatenate([rows, rows, rows[1:]])
    col_index = np.concatenate([np.zeros(steps, dtype=np.intp), rows + 1, rows[1:]])
    return csc_matrix((values, (row_index, col_index)), shape=(steps, steps + 1))


def _correct_chords(
    line: _Polyline, z: NDArray[np.float64], fixed: int, tolerance: float, max_iter: int = 12
) -> NDArray[np.float64] | None:
    """Newton on the chord errors with coordinate `fixed` of z held."""
    z = z.copy()
    free = np.delete(np.arange(z.shape[0]), fixed)
    for iteration in range(max_iter + 1):
        system = _chord_residuals(line, z)
        if system is None:
            return None
        errors, d, n = system
        if float(np.abs(errors).max()) <= tolerance:
            return z
        if iteration == max_iter:
            break
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", MatrixRankWarning)
            step = spsolve(_chord_jacobian(d, n)[:, free], -errors)
        if not np.all(np.isfinite(step)):
            return None
        z[free] += step
    return None


def _ordered(z: NDArray[np.float64]) -> bool:
    return bool(z[0] > 0.0 and z[1] > 0.0 and np.all(np.diff(z[1:]) > 0.0))


def _continue_chords(line: _Polyline, steps: int) -> NDArray[np.float64] | None:
    """Equal chords by following the curve of equal-chord chains out from h ~ 0.

    A chain is 0 = s_0 < s_1 < ... < s_steps with every chord of length h.
    Starting inside the first segment, predictor-corrector steps track the
    chains until the far end reaches the end of the polyline. Returns the
    final (h, s_1, ..., s_steps) or None if the tracking stalls.
    """
    total = line.total
    tolerance = 1e-12 * total
    h0 = 0.5 * float(line.cumulative[1]) / steps
    z = np.concatenate([[h0], h0 * np.arange(1, steps + 1)])
    max_step = total / math.sqrt(steps)
    step = 0.125 * max_step
    for _ in range(500 * (steps + 10)):
        system = _chord_residuals(line, z)
        tangent = None if system is None else _chord_tangent(system[1], system[2])
        if tangent is None:
            return None
        # a step across a vertex corner can land farther than 10 steps away
        reach = max(10.0 * step, 1e-3 * float(z[0]))
        accepted = None
        for fixed in np.argsort(-np.abs(tangent))[:4]:
            candidate = _correct_chords(line, z + step * tangent, int(fixed), tolerance)
            if candidate is not None and _ordered(candidate) and np.linalg.norm(candidate - z) <= reach:
                accepted = candidate
                break
        if accepted is None:
            step *= 0.5
            if step < 1e-13 * total:
                return None
            continue
        if accepted[-1] >= total:
            accepted[-1] = total
            final = _correct_chords(line, accepted, steps, tolerance)
            if final is not None and _ordered(final):
                return final
            step *= 0.5
            if step < 1e-13 * total:
                return None
            continue
        z = accepted
        step = min(1.5 * step, max_step)
    return None


def _resample_by_arc(points: NDArray[np.float64], m: int) -> NDArray[np.float64]:
    vertices, lengths = _segments(points)
    cumulative = np.concatenate([[0.0], np.cumsum(lengths)])
    targets = np.linspace(0.0, cumulative[-1], m)
    columns = [np.interp(targets, cumulative, vertices[:, j]) for j in range(points.shape[1])]
    out = np.stack(columns, axis=1)
    out[-1] = vertices[-1]
    return out


def arc_length_resample(series: TimeSeries, m: int | None = None, method: str = "chord") -> TimeSeries:
    """Re-interpolate a series to constant speed along its polyline.

    method="chord" (default) places m points on the polyline, first and last
    vertex included, so consecutive points are equally far apart. The march
    root from brentq is tried first; when a chord leaves the polyline at a
    vertex the march residual jumps over zero, and the chain is tracked by
    continuation instead. method="arc" spaces the points equally in arc
    length; on polylines with corners the chords then differ slightly.

    A constant series yields m copies of its first point.
    """
    m = series.n if m is None else m
    if m < 2:
        raise ValueError(f"Target length must be >= 2, got {m}")
    if series.n < 2:
        raise ValueError(f"Dewarping needs at least 2 points, got {series.n}")
    if method not in ("chord", "arc"):
        raise ValueError(f"Unknown resampling method {method!r}")

    points = series.points
    vertices, lengths = _segments(points)
    total = float(lengths.sum())
    if total == 0.0:
        return TimeSeries(np.repeat(points[:1], m, axis=0))
    if method == "arc":
        return TimeSeries(_resample_by_arc(points, m))
    if m == 2:
        return TimeSeries(points[[0, -1]])

    chords = np.linalg.norm(np.diff(points, axis=0), axis=1)
    if m == series.n and float(np.ptp(chords)) <= 1e-12 * total:
        return series

    steps = m - 1
    placed = _march_chords(vertices, lengths, steps)
    if placed is None:
        line = _Polyline(vertices, lengths)
        chain = _continue_chords(line, steps)
        if chain is not None:
            relative, _ = line.at(np.concatenate([[0.0], chain[1:]]))
            placed = relative + line.origin
            placed[0] = vertices[0]
            placed[-1] = vertices[-1]
            if not _chords_equal(placed, total):
                placed = None
    if placed is None:
        logger.warning("Chord resampling did not converge; falling back to arc-length spacing")
        return TimeSeries(_resample_by_arc(points, m))
    logger.debug("Resampled %d points to %d equal chords", series.n, m)
    return TimeSeries(placed)


# --- Datasets ----------------------------------------------------------------


@dataclass(frozen=True)
class DatasetEntry:
    id: str
    series: TimeSeries
    label: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"id": self.id, "label": self.label, "points": self.series.to_list()}


@dataclass
class Dataset:
    """Labeled collection of series of one common dimension; ids are unique."""

    entries: list[DatasetEntry] = field(default_factory=list)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for entry in self.entries:
            self._check(entry, seen)
            seen.add(entry.id)

    def _check(self, entry: DatasetEntry, seen: set[str]) -> None:
        if entry.id in seen:
            raise ValueError(f"Duplicate series id {entry.id!r}")
        if self.entries and entry.series.k != self.entries[0].series.k:
            raise ValueError(f"Series {entry.id!r} has dimension {entry.series.k}, expected {self.entries[0].series.k}")

    def add(self, entry: DatasetEntry) -> None:
        self._check(entry, set(self.ids))
        self.entries.append(entry)

    @property
    def ids(self) -> list[str]:
        return [entry.id for entry in self.entries]

    @property
    def dimension(self) -> int | None:
        return self.entries[0].series.k if self.entries else None

    def get(self, entry_id: str) -> DatasetEntry:
        for entry in self.entries:
            if entry.id == entry_id:
                return entry
        raise KeyError(f"No series with id {entry_id!r}")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[DatasetEntry]:
        return iter(self.entries)


def generate_dataset(params: WalkParams, count: int, label: str | None = None) -> Dataset:
    """count walks with seeds params.seed, params.seed + 1, ..."""
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    entries = []
    for index in range(count):
        walk_params = WalkParams(params.k, params.n, params.step_scale, params.smoothing_window, params.seed + index)
        entries.append(DatasetEntry(f"walk-{index:04d}", generate_walk(walk_params), label))
    return Dataset(entries)


def _load_csv(path: Path) -> Dataset:
    rows: list[list[float]] = []
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise DatasetFormatError("empty file, expected a dim0,... header", path, 1)
        expected = [f"dim{j}" for j in range(len(header))]
        if [h.strip() for h in header] != expected or not header:
            raise DatasetFormatError(f"header must be {','.join(expected) or 'dim0'}, got {','.join(header)}", path, 1)
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise DatasetFormatError(f"expected {len(header)} values, got {len(row)}", path, line)
            try:
                rows.append([float(value) for value in row])
            except ValueError as e:
                raise DatasetFormatError(f"not a number: {e}", path, line) from e
    if not rows:
        raise DatasetFormatError("no data rows", path)
    try:
        series = TimeSeries(np.array(rows))
    except ValueError as e:
        raise DatasetFormatError(str(e), path) from e
    return Dataset([DatasetEntry(path.stem, series)])


def _parse_entry(record: Any, path: Path, line: int) -> DatasetEntry:
    if not isinstance(record, dict):
        raise DatasetFormatError("entry must be a JSON object", path, line)
    entry_id = record.get("id")
    label = record.get("label")
    points = record.get("points")
    if not isinstance(entry_id, str) or not entry_id:
        raise DatasetFormatError("entry needs a non-empty string 'id'", path, line)
    if label is not None and not isinstance(label, str):
        raise DatasetFormatError("'label' must be a string or null", path, line)
    if not isinstance(points, list) or not points or not all(isinstance(p, list) for p in points):
        raise DatasetFormatError("'points' must be a non-empty list of coordinate lists", path, line)
    try:
        series = TimeSeries(np.array(points, dtype=np.float64))
    except ValueError as e:
        raise DatasetFormatError(str(e), path, line) from e
    return DatasetEntry(entry_id, series, label)


def _load_jsonl(path: Path) -> Dataset:
    dataset = Dataset()
    with open(path, encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetFormatError(f"invalid JSON: {e.msg}", path, line_number) from e
            entry = _parse_entry(record, path, line_number)
            try:
                dataset.add(entry)
            except ValueError as e:
                raise DatasetFormatError(str(e), path, line_number) from e
    return dataset


def load_dataset(path: Path | str, fmt: SeriesFormat | str | None = None) -> Dataset:
    """Read a csv-single or jsonl-collection file.

    Raises:
        FileNotFoundError: If the file does not exist.
        DatasetFormatError: On malformed content; the message names the line.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Dataset not found: {path}")
    resolved = SeriesFormat(fmt) if fmt is not None else SeriesFormat.for_path(path)
    dataset = _load_csv(path) if resolved is SeriesFormat.CSV_SINGLE else _load_jsonl(path)
    logger.info("Loaded %d series from %s", len(dataset), path)
    return dataset


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_name(path.name + ".tmp")
    with open(tmp_path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    os.replace(str(tmp_path), str(path))


def save_dataset(dataset: Dataset, path: Path | str, fmt: SeriesFormat | str | None = None) -> None:
    """Write a dataset; csv-single holds exactly one series."""
    path = Path(path)
    resolved = SeriesFormat(fmt) if fmt is not None else SeriesFormat.for_path(path)
    if resolved is SeriesFormat.CSV_SINGLE:
        if len(dataset) != 1:
            raise ValueError(f"csv-single holds exactly one series, dataset has {len(dataset)}")
        series = dataset.entries[0].series
        lines = [",".join(f"dim{j}" for j in range(series.k))]
        lines.extend(",".join(format(float(x), ".17g") for x in row) for row in series.points)
        text = "\n".join(lines) + "\n"
    else:
        text = "".join(json.dumps(entry.to_dict()) + "\n" for entry in dataset)
    _atomic_write(path, text)
    logger.info("Wrote %d series to %s", len(dataset), path)
