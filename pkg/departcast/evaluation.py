from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .binning import divide_in_intervals, impose_and_avg, normalize
from .errors import ConstantInputError, EmptyWindowError, ScoreError
from .gmm import EmConfig, GmmModel, bin_mass, fit_em
from .ingest import Dataset, trim_range
from .special import erf_array
from .timeutil import BinGrid, TimeWindow

Vector = Union[Sequence[float], np.ndarray]


@dataclass(frozen=True, eq=False)
class EvaluationReport:
    grid: BinGrid
    input_values: np.ndarray
    erf_values: np.ndarray
    average_erf: float
    normalized_score: float
    label: str = ""
    reference_values: Optional[np.ndarray] = None
    reference_average_erf: Optional[float] = None
    mean_abs_deviation: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        rows: List[Dict[str, Any]] = []
        for i, (label, v, e) in enumerate(zip(self.grid.labels(), self.input_values, self.erf_values)):
            row: Dict[str, Any] = {"interval": label, "value": float(v), "erf": float(e)}
            if self.reference_values is not None:
                row["reference"] = float(self.reference_values[i])
            rows.append(row)
        out: Dict[str, Any] = {
            "kind": "evaluation-report",
            "label": self.label,
            "grid": self.grid.to_dict(),
            "bins": rows,
            "average_erf": self.average_erf,
            "normalized_score": self.normalized_score,
        }
        if self.reference_values is not None:
            out["reference_average_erf"] = self.reference_average_erf
            out["mean_abs_deviation"] = self.mean_abs_deviation
        return out


def score(
    values: Vector,
    grid: BinGrid,
    label: str = "",
    reference: Optional[Vector] = None,
) -> EvaluationReport:
    """Gauss error function per bin, its mean, and the mean times the bin count."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size != grid.bin_count:
        raise ScoreError(f"Got {v.size} values for a grid of {grid.bin_count} bins")
    if not np.all(np.isfinite(v)) or np.any(v < 0):
        raise ScoreError("Scored values must be finite and non-negative")

    erf_values = erf_array(v)
    average = float(np.mean(erf_values))
    ref = ref_avg = mad = None
    if reference is not None:
        ref = np.asarray(reference, dtype=np.float64).ravel()
        if ref.size != grid.bin_count:
            raise ScoreError(f"Got {ref.size} reference values for a grid of {grid.bin_count} bins")
        ref_avg = float(np.mean(erf_array(ref)))
        mad = float(np.mean(np.abs(v - ref)))
    return EvaluationReport(grid, v, erf_values, average, average * grid.bin_count, label, ref, ref_avg, mad)


def ground_truth_bins(test: Dataset, grid: BinGrid) -> np.ndarray:
    trimmed = trim_range(test, grid.window)
    if not trimmed.records:
        raise EmptyWindowError(f"No test departures inside {grid.window}")
    return normalize(impose_and_avg(divide_in_intervals(trimmed, grid)))


def pearson_correlation(x: Vector, y: Vector) -> float:
    a = np.asarray(x, dtype=np.float64).ravel()
    b = np.asarray(y, dtype=np.float64).ravel()
    if a.size != b.size:
        raise ScoreError(f"Correlation needs equal lengths, got {a.size} and {b.size}")
    if a.size < 2:
        raise ScoreError("Correlation needs at least two points")
    da = a - a.mean()
    db = b - b.mean()
    sa = float(np.sqrt(np.dot(da, da)))
    sb = float(np.sqrt(np.dot(db, db)))
    if sa == 0.0 or sb == 0.0:
        raise ConstantInputError()
    r = float(np.dot(da, db)) / (sa * sb)
    return max(-1.0, min(1.0, r))


@dataclass(frozen=True, eq=False)
class SweepPoint:
    bin_count: int
    components: int
    gaussian: EvaluationReport
    gmm: EvaluationReport

    def to_dict(self) -> Dict[str, Any]:
        def summary(r: EvaluationReport) -> Dict[str, Any]:
            return {
                "average_erf": r.average_erf,
                "normalized_score": r.normalized_score,
                "mean_abs_deviation": r.mean_abs_deviation,
            }

        return {
            "bin_count": self.bin_count,
            "bin_width_s": self.gaussian.grid.width,
            "components": self.components,
            "gaussian": summary(self.gaussian),
            "gmm": summary(self.gmm),
        }


@dataclass(frozen=True, eq=False)
class BinCountSweep:
    """Both models scored against one test set at several granularities."""

    window: TimeWindow
    points: Tuple[SweepPoint, ...]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": "bin-count-sweep",
            "window": self.window.to_dict(),
            "points": [p.to_dict() for p in self.points],
        }


def sweep_bin_counts(
    train: Dataset,
    test: Dataset,
    window: TimeWindow,
    bin_counts: Sequence[int],
    em: Optional[EmConfig] = None,
    components: int = 0,
) -> BinCountSweep:
    """Approximated-Gaussian and GMM normalized scores for every bin count.

    ``components`` fixes K for every fit; 0 uses K equal to the bin count.
    """
    counts = sorted(set(int(b) for b in bin_counts))
    if not counts:
        raise ScoreError("Need at least one bin count to compare")
    em = em or EmConfig()
    grids = [BinGrid(window, b) for b in counts]

    trimmed = trim_range(train, window)
    times = trimmed.seconds()
    fits: Dict[int, GmmModel] = {}
    points: List[SweepPoint] = []
    for grid in grids:
        b = grid.bin_count
        k = components or b
        if k not in fits:
            fits[k] = fit_em(times, replace(em, component_count=k), window)
        reference = ground_truth_bins(test, grid)
        gaussian = normalize(impose_and_avg(divide_in_intervals(trimmed, grid)))
        points.append(
            SweepPoint(
                b,
                k,
                score(gaussian, grid, f"approximated Gaussian, b={b}", reference),
                score(bin_mass(fits[k], grid), grid, f"GMM, K={k}, b={b}", reference),
            )
        )
        logging.info(
            f"b={b}: gaussian score {points[-1].gaussian.normalized_score:.4f}, "
            f"gmm score {points[-1].gmm.normalized_score:.4f}"
        )
    return BinCountSweep(window, tuple(points))


def text_table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    """Left-aligned columns separated by two spaces, with a dashed rule under the header."""
    widths = [max([len(h)] + [len(r[c]) for r in rows]) for c, h in enumerate(headers)]

    def fmt(cells: Sequence[str]) -> str:
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()

    lines = [fmt(headers), fmt(["-" * w for w in widths])]
    lines.extend(fmt(r) for r in rows)
    return "\n".join(lines) + "\n"


def render_table(report: EvaluationReport, value_header: str = "Predicted values") -> str:
    headers = ["Time intervals", value_header, "erf values"]
    has_ref = report.reference_values is not None
    if has_ref:
        headers.append("Test values")
    rows = []
    for i, label in enumerate(report.grid.labels()):
        row = [label, f"{report.input_values[i]:.4f}", f"{report.erf_values[i]:.4f}"]
        if has_ref:
            row.append(f"{report.reference_values[i]:.4f}")  # type: ignore[index]
        rows.append(row)
    lines = []
    if report.label:
        lines.append(report.label)
    lines.append(text_table(headers, rows))
    lines.append(f"Average erf value: {report.average_erf:.4f}")
    lines.append(f"Normalized score on a number of bins: {report.normalized_score:.4f}")
    if has_ref:
        lines.append(f"Test-set average erf value: {report.reference_average_erf:.4f}")
        lines.append(f"Mean absolute deviation from test bins: {report.mean_abs_deviation:.4f}")
    return "\n".join(lines) + "\n"


def render_sweep(sweep: BinCountSweep) -> str:
    rows = [
        [
            str(p.bin_count),
            f"{p.gaussian.grid.width / 60:g}",
            str(p.components),
            f"{p.gaussian.average_erf:.4f}",
            f"{p.gaussian.normalized_score:.4f}",
            f"{p.gmm.average_erf:.4f}",
            f"{p.gmm.normalized_score:.4f}",
        ]
        for p in sweep.points
    ]
    headers = ["Bins", "Minutes", "K", "Gaussian erf", "Gaussian score", "GMM erf", "GMM score"]
    return f"Normalized score on a number of bins, window {sweep.window}\n" + text_table(headers, rows)
