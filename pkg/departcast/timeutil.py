"""Time-of-day arithmetic, analysis windows and bin grids.

Departure times are whole seconds since midnight. Every bin is half-open,
``[lo, hi)``, so a grid partitions its window without double counting and a
departure exactly at the window end falls outside.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .errors import GridError, TimeFormatError, WindowError

SECONDS_PER_DAY = 86400

_HMS = re.compile(r"^(\d{2}):(\d{2}):(\d{2})$")


@dataclass(frozen=True, order=True)
class TimeOfDay:
    seconds: int

    def __post_init__(self) -> None:
        if isinstance(self.seconds, bool) or not isinstance(self.seconds, (int, np.integer)):
            raise TimeFormatError(repr(self.seconds), "seconds must be an integer")
        if not 0 <= self.seconds < SECONDS_PER_DAY:
            raise TimeFormatError(str(self.seconds), "seconds must lie in [0, 86400)")
        object.__setattr__(self, "seconds", int(self.seconds))

    @classmethod
    def parse(cls, text: str) -> "TimeOfDay":
        m = _HMS.match(text.strip())
        if not m:
            raise TimeFormatError(text)
        h, mi, s = (int(g) for g in m.groups())
        if h > 23:
            raise TimeFormatError(text, "hour out of range")
        if mi > 59:
            raise TimeFormatError(text, "minute out of range")
        if s > 59:
            raise TimeFormatError(text, "second out of range")
        return cls(h * 3600 + mi * 60 + s)

    @classmethod
    def of(cls, hours: int, minutes: int = 0, seconds: int = 0) -> "TimeOfDay":
        return cls(hours * 3600 + minutes * 60 + seconds)

    @property
    def hms(self) -> Tuple[int, int, int]:
        h, rem = divmod(self.seconds, 3600)
        m, s = divmod(rem, 60)
        return h, m, s

    def __str__(self) -> str:
        h, m, s = self.hms
        return f"{h:02d}:{m:02d}:{s:02d}"


@dataclass(frozen=True)
class TimeWindow:
    start: TimeOfDay
    end: TimeOfDay

    def __post_init__(self) -> None:
        if not self.start < self.end:
            raise WindowError(f"Window start {self.start} must precede end {self.end}")

    @classmethod
    def parse(cls, start: str, end: str) -> "TimeWindow":
        return cls(TimeOfDay.parse(start), TimeOfDay.parse(end))

    @property
    def length(self) -> int:
        return self.end.seconds - self.start.seconds

    def contains(self, t: TimeOfDay) -> bool:
        return self.start <= t < self.end

    def to_dict(self) -> Dict[str, str]:
        return {"start": str(self.start), "end": str(self.end)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TimeWindow":
        return cls.parse(str(data["start"]), str(data["end"]))

    def __str__(self) -> str:
        return f"{self.start}-{self.end}"


# Commuter window used throughout the evaluation protocol.
DEFAULT_WINDOW = TimeWindow(TimeOfDay.of(6), TimeOfDay.of(9))


@dataclass(frozen=True)
class BinGrid:
    window: TimeWindow
    bin_count: int

    def __post_init__(self) -> None:
        if isinstance(self.bin_count, bool) or int(self.bin_count) != self.bin_count:
            raise GridError(self.window.length, self.bin_count, "bin_count must be an integer")
        object.__setattr__(self, "bin_count", int(self.bin_count))
        if self.bin_count < 1:
            raise GridError(self.window.length, self.bin_count, "bin_count must be at least 1")
        if self.window.length % self.bin_count:
            raise GridError(self.window.length, self.bin_count)

    @staticmethod
    def is_exact(window: TimeWindow, bin_count: int) -> bool:
        return bin_count >= 1 and window.length % bin_count == 0

    @property
    def width(self) -> int:
        return self.window.length // self.bin_count

    def bounds(self, i: int) -> Tuple[int, int]:
        lo = self.window.start.seconds + i * self.width
        return lo, lo + self.width

    def edges(self) -> np.ndarray:
        """Bin edges in seconds since midnight, ``bin_count + 1`` values."""
        return self.window.start.seconds + self.width * np.arange(self.bin_count + 1, dtype=np.int64)

    def bin_index(self, t: TimeOfDay) -> Optional[int]:
        if not self.window.contains(t):
            return None
        return (t.seconds - self.window.start.seconds) // self.width

    def labels(self) -> List[str]:
        return [interval_label(*self.bounds(i)) for i in range(self.bin_count)]

    def to_dict(self) -> Dict[str, Any]:
        return {"window": self.window.to_dict(), "bin_count": self.bin_count, "bin_width_s": self.width}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BinGrid":
        return cls(TimeWindow.from_dict(data["window"]), int(data["bin_count"]))


def bin_index(grid: BinGrid, t: TimeOfDay) -> Optional[int]:
    """Index of the bin holding ``t``, or None when ``t`` is outside the window."""
    return grid.bin_index(t)


@dataclass(frozen=True)
class DepartureRecord:
    """First daily departure of one vehicle within one sampling session."""

    vehicle_id: str
    session_id: str
    departure: TimeOfDay


def _clock(seconds: int) -> str:
    h, rem = divmod(seconds % SECONDS_PER_DAY, 3600)
    m, s = divmod(rem, 60)
    h12 = h % 12 or 12
    text = f"{h12}.{m:02d}"
    if s:
        text += f":{s:02d}"
    return text


def interval_label(lo: int, hi: int) -> str:
    """Report label in the style ``6.00-6.15am``."""
    suffix = "am" if hi < 12 * 3600 else "pm"
    return f"{_clock(lo)}-{_clock(hi)}{suffix}"
