from __future__ import annotations

import hashlib
import uuid
from typing import Optional, Sequence

import pygal
from pygal.style import CleanStyle

from .evaluation import BinCountSweep, EvaluationReport
from .margins import MarginForecast
from .timeutil import BinGrid


def _render(chart: pygal.graph.graph.Graph) -> str:
    """Render with a chart id derived from the title and series, so equal inputs give equal bytes."""
    key = repr((chart.title, getattr(chart, "x_labels", None), [(kw.get("title"), list(v)) for v, kw in chart.raw_series]))
    chart.uuid = str(uuid.UUID(bytes=hashlib.sha256(key.encode("utf-8")).digest()[:16]))
    return chart.render(is_unicode=True)


def margin_chart(fc: MarginForecast, title: Optional[str] = None) -> str:
    """One box per interval: whiskers at the margins, median line at the mean."""
    chart = pygal.Box(box_mode="extremes", style=CleanStyle, show_legend=False, x_label_rotation=45, js=[])
    chart.title = title or f"Departures per interval ({fc.confidence_level:.1%} margins, k={fc.k:g})"
    chart.y_title = "Vehicles departing"
    for label, b in zip(fc.grid.labels(), fc.bins):
        chart.add(label, [b.lower, b.mean, b.upper])
    return _render(chart)


def bin_share_chart(values: Sequence[float], grid: BinGrid, title: str, series: str = "Predicted") -> str:
    chart = pygal.Bar(style=CleanStyle, x_label_rotation=45, js=[])
    chart.title = title
    chart.y_title = "Share of departures"
    chart.x_labels = grid.labels()
    chart.add(series, [round(float(v), 6) for v in values])
    return _render(chart)


def report_chart(report: EvaluationReport) -> str:
    chart = pygal.Bar(style=CleanStyle, x_label_rotation=45, js=[])
    chart.title = report.label or "Predicted vs test shares"
    chart.y_title = "Share of departures"
    chart.x_labels = report.grid.labels()
    chart.add("Predicted", [round(float(v), 6) for v in report.input_values])
    if report.reference_values is not None:
        chart.add("Test", [round(float(v), 6) for v in report.reference_values])
    chart.add("erf", [round(float(v), 6) for v in report.erf_values])
    return _render(chart)


def sweep_chart(sweep: BinCountSweep) -> str:
    chart = pygal.Line(style=CleanStyle, js=[])
    chart.title = "Normalized erf score by number of bins"
    chart.x_title = "Bins"
    chart.y_title = "Average erf x bins"
    chart.x_labels = [str(p.bin_count) for p in sweep.points]
    chart.add("Approximated Gaussian", [round(p.gaussian.normalized_score, 6) for p in sweep.points])
    chart.add("GMM", [round(p.gmm.normalized_score, 6) for p in sweep.points])
    return _render(chart)
