from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from .errors import (
    ConfigError,
    CsvFormatError,
    DepartcastError,
    DuplicateRecordError,
    SessionCollisionError,
    TimeFormatError,
)
from .timeutil import DepartureRecord, TimeOfDay, TimeWindow

CSV_HEADER = ("vehicle_id", "session_id", "start_tm")


@dataclass(frozen=True)
class Dataset:
    """Ordered first-departure records plus the sessions they belong to.

    ``sessions`` lists session ids in order of first appearance. Build with
    ``Dataset.from_records`` so the one-record-per-(vehicle, session) rule is
    checked.
    """

    records: Tuple[DepartureRecord, ...] = ()
    sessions: Tuple[str, ...] = ()

    @classmethod
    def from_records(cls, records: Iterable[DepartureRecord]) -> "Dataset":
        recs = tuple(records)
        seen = set()
        sessions: Dict[str, None] = {}
        for r in recs:
            key = (r.vehicle_id, r.session_id)
            if key in seen:
                raise DuplicateRecordError(r.vehicle_id, r.session_id)
            seen.add(key)
            sessions.setdefault(r.session_id, None)
        return cls(recs, tuple(sessions))

    def __len__(self) -> int:
        return len(self.records)

    def seconds(self) -> np.ndarray:
        return np.fromiter((r.departure.seconds for r in self.records), dtype=np.int64, count=len(self.records))

    def by_session(self) -> Dict[str, List[DepartureRecord]]:
        out: Dict[str, List[DepartureRecord]] = {s: [] for s in self.sessions}
        for r in self.records:
            out[r.session_id].append(r)
        return out


def _decode(stream: Union[IO[bytes], IO[str], bytes, str]) -> str:
    if isinstance(stream, bytes):
        raw: Union[bytes, str] = stream
    elif isinstance(stream, str):
        return stream
    else:
        raw = stream.read()
    if isinstance(raw, bytes):
        try:
            return raw.decode("utf-8-sig")
        except UnicodeDecodeError as e:
            raise CsvFormatError(0, "", f"input is not UTF-8 ({e})") from e
    return raw


def parse_csv(stream: Union[IO[bytes], IO[str], bytes, str]) -> Dataset:
    """Parse ``vehicle_id,session_id,start_tm`` rows into a Dataset.

    Line numbers in errors are 1-based and count the header as line 1.
    """
    text = _decode(stream)
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise CsvFormatError(1, "", "missing header")
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise CsvFormatError(1, "header", f"expected {','.join(CSV_HEADER)!r}, got {','.join(header)!r}")

    records: List[DepartureRecord] = []
    seen: Dict[Tuple[str, str], int] = {}
    for row in reader:
        line = reader.line_num
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise CsvFormatError(line, "row", f"expected {len(CSV_HEADER)} fields, got {len(row)}")
        vehicle_id, session_id, start_tm = (v.strip() for v in row)
        if not vehicle_id:
            raise CsvFormatError(line, "vehicle_id", "empty value")
        if not session_id:
            raise CsvFormatError(line, "session_id", "empty value")
        try:
            departure = TimeOfDay.parse(start_tm)
        except TimeFormatError as e:
            raise CsvFormatError(line, "start_tm", str(e)) from e
        key = (vehicle_id, session_id)
        if key in seen:
            raise DuplicateRecordError(vehicle_id, session_id, line)
        seen[key] = line
        records.append(DepartureRecord(vehicle_id, session_id, departure))

    return Dataset.from_records(records)


def write_csv(dataset: Dataset, stream: IO[str]) -> None:
    """Write the canonical CSV form (LF line endings, input order)."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in dataset.records:
        writer.writerow((r.vehicle_id, r.session_id, str(r.departure)))


def to_csv_text(dataset: Dataset) -> str:
    buf = io.StringIO()
    write_csv(dataset, buf)
    return buf.getvalue()


def load_dataset(path: Union[str, Path]) -> Dataset:
    p = Path(path)
    try:
        with p.open("rb") as f:
            return parse_csv(f)
    except DepartcastError as e:
        # keep the concrete type and its fields, only prefix the message
        e.args = (f"{p}: {e}",)
        e.path = p  # type: ignore[attr-defined]
        raise


def trim_range(d: Dataset, window: TimeWindow) -> Dataset:
    kept = tuple(r for r in d.records if window.contains(r.departure))
    if len(kept) == len(d.records):
        return d
    sessions = {r.session_id for r in kept}
    return Dataset(kept, tuple(s for s in d.sessions if s in sessions))


def superimpose(parts: Sequence[Dataset]) -> Dataset:
    owner: Dict[str, int] = {}
    collisions = set()
    for idx, part in enumerate(parts):
        for s in part.sessions:
            if s in owner and owner[s] != idx:
                collisions.add(s)
            owner.setdefault(s, idx)
    if collisions:
        raise SessionCollisionError(sorted(collisions))
    records = tuple(r for part in parts for r in part.records)
    sessions = tuple(s for part in parts for s in part.sessions)
    return Dataset(records, sessions)


def prefix_sessions(d: Dataset, prefix: str) -> Dataset:
    """Namespace every session id as ``prefix/session``."""
    rename = {s: f"{prefix}/{s}" for s in d.sessions}
    records = tuple(DepartureRecord(r.vehicle_id, rename[r.session_id], r.departure) for r in d.records)
    return Dataset(records, tuple(rename[s] for s in d.sessions))


@dataclass(frozen=True)
class SyntheticSpec:
    window: TimeWindow
    true_mean: TimeOfDay
    true_stddev: float
    session_count: int
    vehicles_per_session: int
    rng_seed: int = 0
    session_prefix: str = field(default="S")

    def __post_init__(self) -> None:
        if not self.window.contains(self.true_mean):
            raise ConfigError(f"Synthetic mean {self.true_mean} lies outside window {self.window}")
        if not self.true_stddev > 0:
            raise ConfigError(f"Synthetic stddev must be positive, got {self.true_stddev}")
        if self.session_count < 1:
            raise ConfigError(f"session_count must be positive, got {self.session_count}")
        if self.vehicles_per_session < 1:
            raise ConfigError(f"vehicles_per_session must be positive, got {self.vehicles_per_session}")


def _draw_in_window(rng: np.random.Generator, spec: SyntheticSpec, n: int) -> np.ndarray:
    lo, hi = spec.window.start.seconds, spec.window.end.seconds
    out = np.empty(0, dtype=np.int64)
    while out.size < n:
        need = n - out.size
        draws = np.rint(rng.normal(spec.true_mean.seconds, spec.true_stddev, size=2 * need + 16)).astype(np.int64)
        draws = draws[(draws >= lo) & (draws < hi)]
        out = np.concatenate([out, draws[:need]])
    return out


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Normal departures per session, rejection-resampled into the window."""
    rng = np.random.default_rng(spec.rng_seed)
    width = max(2, len(str(spec.session_count)))
    vwidth = max(4, len(str(spec.vehicles_per_session)))
    records: List[DepartureRecord] = []
    sessions: List[str] = []
    for j in range(spec.session_count):
        session_id = f"{spec.session_prefix}{j + 1:0{width}d}"
        sessions.append(session_id)
        for v, t in enumerate(_draw_in_window(rng, spec, spec.vehicles_per_session)):
            records.append(DepartureRecord(f"V{v + 1:0{vwidth}d}", session_id, TimeOfDay(int(t))))
    logging.debug(f"Generated {len(records)} synthetic departures over {len(sessions)} sessions")
    return Dataset(tuple(records), tuple(sessions))
