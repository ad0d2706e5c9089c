from __future__ import annotations

from typing import Any, Optional, Sequence


class DepartcastError(RuntimeError):
    """Base class for every error raised by departcast."""


class ConfigError(DepartcastError, ValueError):
    pass


class TimeFormatError(DepartcastError, ValueError):
    def __init__(self, text: str, reason: str = "expected HH:MM:SS") -> None:
        super().__init__(f"Invalid time {text!r}: {reason}")
        self.text = text


class WindowError(DepartcastError, ValueError):
    pass


class GridError(DepartcastError, ValueError):
    def __init__(self, window_seconds: int, bin_count: int, message: Optional[str] = None) -> None:
        super().__init__(
            message
            or f"Window of {window_seconds} s cannot be split into {bin_count} bins of whole seconds"
        )
        self.window_seconds = window_seconds
        self.bin_count = bin_count


class CsvFormatError(DepartcastError, ValueError):
    def __init__(self, line: int, field: str, message: str) -> None:
        super().__init__(f"line {line}, field {field!r}: {message}")
        self.line = line
        self.field = field


class DuplicateRecordError(DepartcastError, ValueError):
    def __init__(self, vehicle_id: str, session_id: str, line: Optional[int] = None) -> None:
        where = f"line {line}: " if line is not None else ""
        super().__init__(
            f"{where}duplicate departure for vehicle {vehicle_id!r} in session {session_id!r}"
        )
        self.vehicle_id = vehicle_id
        self.session_id = session_id
        self.line = line


class SessionCollisionError(DepartcastError, ValueError):
    def __init__(self, session_ids: Sequence[str]) -> None:
        names = ", ".join(sorted(session_ids))
        super().__init__(f"Session ids present in more than one dataset: {names}")
        self.session_ids = tuple(sorted(session_ids))


class OutOfWindowError(DepartcastError, ValueError):
    def __init__(self, record: Any) -> None:
        super().__init__(
            f"Record {record.vehicle_id}/{record.session_id} at {record.departure} "
            "lies outside the grid window (trim the dataset first)"
        )
        self.record = record


class NoSessionsError(DepartcastError, ValueError):
    def __init__(self) -> None:
        super().__init__("no sampling sessions")


class EmptyWindowError(DepartcastError, ValueError):
    def __init__(self, message: str = "empty window") -> None:
        super().__init__(message)


class NoFeasibleGranularityError(DepartcastError):
    def __init__(self, trace: Sequence[Any], message: Optional[str] = None) -> None:
        super().__init__(message or f"No bin count satisfies the constraint ({len(trace)} candidates tried)")
        self.trace = list(trace)


class EmFitError(DepartcastError, ValueError):
    pass


class MixtureMassError(DepartcastError, ValueError):
    def __init__(self) -> None:
        super().__init__("mixture mass outside window")


class ScoreError(DepartcastError, ValueError):
    pass


class ConstantInputError(DepartcastError, ValueError):
    def __init__(self) -> None:
        super().__init__("constant input")


class GridMismatchError(DepartcastError, ValueError):
    pass


class ArtifactError(DepartcastError, ValueError):
    pass
