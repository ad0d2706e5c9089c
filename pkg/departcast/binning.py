from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Tuple

import numpy as np

from .errors import EmptyWindowError, NoSessionsError, OutOfWindowError
from .ingest import Dataset
from .timeutil import BinGrid


@dataclass(frozen=True, eq=False)
class CountMatrix:
    """Departure counts per session (rows) and bin (columns)."""

    grid: BinGrid
    session_ids: Tuple[str, ...]
    counts: np.ndarray  # shape (n_sessions, bin_count), int64

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "grid": self.grid.to_dict(),
            "session_ids": list(self.session_ids),
            "counts": self.counts.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CountMatrix":
        grid = BinGrid.from_dict(data["grid"])
        counts = np.asarray(data["counts"], dtype=np.int64).reshape(-1, grid.bin_count)
        return cls(grid, tuple(data["session_ids"]), counts)


@dataclass(frozen=True, eq=False)
class BinStats:
    """Per-bin mean departure counts over all sessions (unnormalized)."""

    grid: BinGrid
    means: np.ndarray  # shape (bin_count,), float64
    total_sessions: int

    @property
    def min_mean(self) -> float:
        return float(self.means.min())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "grid": self.grid.to_dict(),
            "means": [float(m) for m in self.means],
            "total_sessions": self.total_sessions,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BinStats":
        grid = BinGrid.from_dict(data["grid"])
        return cls(grid, np.asarray(data["means"], dtype=np.float64), int(data["total_sessions"]))


def divide_in_intervals(d: Dataset, grid: BinGrid) -> CountMatrix:
    n = len(d.sessions)
    counts = np.zeros((n, grid.bin_count), dtype=np.int64)
    if not d.records:
        return CountMatrix(grid, tuple(d.sessions), counts)

    row_of = {s: j for j, s in enumerate(d.sessions)}
    seconds = d.seconds()
    start, end = grid.window.start.seconds, grid.window.end.seconds
    outside = np.flatnonzero((seconds < start) | (seconds >= end))
    if outside.size:
        raise OutOfWindowError(d.records[int(outside[0])])

    rows = np.fromiter((row_of[r.session_id] for r in d.records), dtype=np.int64, count=len(d.records))
    cols = (seconds - start) // grid.width
    np.add.at(counts, (rows, cols), 1)
    return CountMatrix(grid, tuple(d.sessions), counts)


def impose_and_avg(k: CountMatrix) -> BinStats:
    n = k.counts.shape[0]
    if n == 0:
        raise NoSessionsError()
    means = k.counts.sum(axis=0, dtype=np.int64) / n
    return BinStats(k.grid, means.astype(np.float64), n)


def normalize(stats: BinStats) -> np.ndarray:
    """Per-bin share of departures, summing to 1."""
    total = float(stats.means.sum())
    if not total > 0:
        raise EmptyWindowError()
    return stats.means / total
