"""Approximated-Gaussian forecasting: per-bin confidence margins and granularity scaling.

Per-session bin counts are Poisson-like; averaging them over sessions gives a
per-bin mean ``m`` whose k-sigma band is ``[m - k*sqrt(m), m + k*sqrt(m)]``.
Scaling searches for the finest grid whose emptiest bin still satisfies an
epsilon constraint.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .binning import BinStats, divide_in_intervals, impose_and_avg, normalize
from .errors import ConfigError, NoFeasibleGranularityError, NoSessionsError
from .ingest import Dataset, trim_range
from .special import coverage, k_for_coverage
from .timeutil import BinGrid, TimeWindow

DEFAULT_K = 2.0


@dataclass(frozen=True)
class MarginBin:
    mean: float
    lower: float
    upper: float


@dataclass(frozen=True)
class MarginForecast:
    grid: BinGrid
    bins: Tuple[MarginBin, ...]
    k: float
    confidence_level: float
    total_sessions: int

    @property
    def means(self) -> np.ndarray:
        return np.array([b.mean for b in self.bins], dtype=np.float64)

    def normalized_means(self) -> np.ndarray:
        return normalize(BinStats(self.grid, self.means, self.total_sessions))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": "margin-forecast",
            "grid": self.grid.to_dict(),
            "k": self.k,
            "confidence_level": self.confidence_level,
            "total_sessions": self.total_sessions,
            "bins": [
                {"interval": label, "mean": b.mean, "lower": b.lower, "upper": b.upper}
                for label, b in zip(self.grid.labels(), self.bins)
            ],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MarginForecast":
        grid = BinGrid.from_dict(data["grid"])
        bins = tuple(MarginBin(float(b["mean"]), float(b["lower"]), float(b["upper"])) for b in data["bins"])
        return cls(grid, bins, float(data["k"]), float(data["confidence_level"]), int(data["total_sessions"]))


def confidence_level(k: float) -> float:
    return coverage(k)


def k_for_confidence(level: float) -> float:
    return k_for_coverage(level)


def compute_margins(stats: BinStats, k: float = DEFAULT_K) -> MarginForecast:
    if not math.isfinite(k) or k < 0:
        raise ConfigError(f"k must be a non-negative number, got {k}")
    bins = []
    for m in stats.means:
        m = float(m)
        half = k * math.sqrt(m)
        bins.append(MarginBin(mean=m, lower=max(0.0, m - half), upper=m + half))
    return MarginForecast(stats.grid, tuple(bins), float(k), confidence_level(k), stats.total_sessions)


class GranularityRule(str, enum.Enum):
    PAPER_LITERAL = "paper"
    RELATIVE_ERROR = "relative"

    @classmethod
    def parse(cls, value: "str | GranularityRule") -> "GranularityRule":
        if isinstance(value, cls):
            return value
        aliases = {"paper": cls.PAPER_LITERAL, "paper-literal": cls.PAPER_LITERAL,
                   "relative": cls.RELATIVE_ERROR, "relative-error": cls.RELATIVE_ERROR}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ConfigError(f"Unknown granularity rule {value!r} (use 'paper' or 'relative')")


def satisfies(rule: GranularityRule, epsilon: float, min_mean: float) -> bool:
    """Whether a grid whose emptiest bin has mean ``min_mean`` is acceptable."""
    if not min_mean > 0:
        return False
    root = math.sqrt(min_mean)
    if rule is GranularityRule.PAPER_LITERAL:
        return epsilon <= min_mean / root
    return root / min_mean <= epsilon


@dataclass(frozen=True)
class TraceEntry:
    bin_count: int
    min_mean: Optional[float]
    satisfied: bool
    note: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {"b": self.bin_count, "min_mean": self.min_mean, "satisfied": self.satisfied, "note": self.note}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TraceEntry":
        mm = data.get("min_mean")
        return cls(int(data["b"]), None if mm is None else float(mm), bool(data["satisfied"]), str(data.get("note", "")))


@dataclass(frozen=True, eq=False)
class GranularityResult:
    chosen_b: int
    stats: BinStats
    epsilon: float
    rule: GranularityRule
    trace: Tuple[TraceEntry, ...] = field(default_factory=tuple)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": "granularity-result",
            "chosen_b": self.chosen_b,
            "epsilon": self.epsilon,
            "rule": self.rule.value,
            "stats": self.stats.to_dict(),
            "trace": [t.to_dict() for t in self.trace],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GranularityResult":
        return cls(
            int(data["chosen_b"]),
            BinStats.from_dict(data["stats"]),
            float(data["epsilon"]),
            GranularityRule.parse(data["rule"]),
            tuple(TraceEntry.from_dict(t) for t in data["trace"]),
        )


def forecast(d: Dataset, grid: BinGrid, k: float = DEFAULT_K) -> MarginForecast:
    """Trim, bin, average and compute margins in one step."""
    trimmed = trim_range(d, grid.window)
    return compute_margins(impose_and_avg(divide_in_intervals(trimmed, grid)), k)


def scale_granularity(
    d: Dataset,
    window: TimeWindow,
    epsilon: float,
    rule: "GranularityRule | str" = GranularityRule.PAPER_LITERAL,
    b_min: int = 1,
    b_max: int = 36,
) -> GranularityResult:
    rule = GranularityRule.parse(rule)
    if not 0.0 < epsilon <= 1.0:
        raise ConfigError(f"epsilon must lie in (0, 1], got {epsilon}")
    if not 1 <= b_min <= b_max:
        raise ConfigError(f"Need 1 <= b_min <= b_max, got b_min={b_min}, b_max={b_max}")

    trimmed = trim_range(d, window)
    if not trimmed.sessions:
        raise NoSessionsError()

    trace: List[TraceEntry] = []
    best: Optional[Tuple[int, BinStats]] = None
    for b in range(b_min, b_max + 1):
        if not BinGrid.is_exact(window, b):
            logging.info(f"Skipping b={b}: {window.length} s is not divisible into {b} bins")
            trace.append(TraceEntry(b, None, False, "inexact bin width"))
            continue
        stats = impose_and_avg(divide_in_intervals(trimmed, BinGrid(window, b)))
        m_min = stats.min_mean
        ok = satisfies(rule, epsilon, m_min)
        logging.debug(f"b={b} m_min={m_min:.4f} satisfied={ok}")
        trace.append(TraceEntry(b, m_min, ok))
        if ok:
            best = (b, stats)

    if best is None:
        raise NoFeasibleGranularityError(
            trace, f"No bin count in [{b_min}, {b_max}] satisfies the {rule.value} rule at epsilon={epsilon}"
        )
    chosen_b, stats = best
    return GranularityResult(chosen_b, stats, float(epsilon), rule, tuple(trace))
