from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from . import __version__
from .artifacts import dumps, gmm_artifact, read_artifact, to_scorable
from .charts import bin_share_chart, margin_chart, report_chart, sweep_chart
from .config import FORMATS, RunConfig, load_config, resolve_run_config
from .errors import (
    ConfigError,
    ConstantInputError,
    CsvFormatError,
    DepartcastError,
    GridMismatchError,
    NoFeasibleGranularityError,
    TimeFormatError,
)
from .evaluation import (
    ground_truth_bins,
    pearson_correlation,
    render_sweep,
    render_table,
    score,
    sweep_bin_counts,
    text_table,
)
from .gmm import GmmModel, bin_mass, fit_em
from .ingest import (
    Dataset,
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
    prefix_sessions,
    superimpose,
    to_csv_text,
    trim_range,
)
from .margins import GranularityResult, MarginForecast, compute_margins, forecast, scale_granularity
from .timeutil import BinGrid, TimeOfDay


def _emit(text: str, run: RunConfig) -> None:
    if run.out is not None:
        run.out.parent.mkdir(parents=True, exist_ok=True)
        with run.out.open("w", encoding="utf-8", newline="") as f:
            f.write(text)
        logging.info(f"Wrote {run.out}")
    else:
        sys.stdout.write(text)


def _require(path: Optional[Path], flag: str) -> Path:
    if path is None:
        raise ConfigError(f"{flag} is required")
    return path


def _load_inputs(run: RunConfig) -> Dataset:
    """One training CSV as is, or several superimposed with sessions namespaced by file stem."""
    if not run.inputs:
        raise ConfigError("--input is required")
    if len(run.inputs) == 1:
        return load_dataset(run.inputs[0])
    parts = [prefix_sessions(load_dataset(p), p.stem) for p in run.inputs]
    logging.info(f"Superimposed {len(parts)} inputs: {', '.join(p.stem for p in run.inputs)}")
    return superimpose(parts)


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _margin_rows(fc: MarginForecast) -> List[List[str]]:
    return [
        [label, f"{b.mean:.4f}", f"{b.lower:.4f}", f"{b.upper:.4f}"]
        for label, b in zip(fc.grid.labels(), fc.bins)
    ]


def _render_margins(fc: MarginForecast, fmt: str) -> str:
    if fmt == "json":
        return dumps(fc.to_dict())
    if fmt == "csv":
        return _csv_text(
            ["interval", "mean", "lower", "upper"],
            [[label, repr(b.mean), repr(b.lower), repr(b.upper)] for label, b in zip(fc.grid.labels(), fc.bins)],
        )
    if fmt == "svg":
        return margin_chart(fc)
    table = text_table(["Time intervals", "Mean", "Lower", "Upper"], _margin_rows(fc))
    return (
        table
        + f"\nk = {fc.k:g} ({fc.confidence_level:.2%} confidence), "
        + f"{fc.total_sessions} sampling session(s), {fc.grid.bin_count} bins of {fc.grid.width // 60} min\n"
    )


def _trace_table(res: GranularityResult) -> str:
    rows = [
        [str(t.bin_count), "-" if t.min_mean is None else f"{t.min_mean:.4f}", "yes" if t.satisfied else "no", t.note]
        for t in res.trace
    ]
    return text_table(["b", "min mean", "satisfied", "note"], rows)


def cmd_forecast(run: RunConfig) -> MarginForecast:
    d = _load_inputs(run)
    grid = BinGrid(run.window, run.bins)
    fc = forecast(d, grid, run.k)
    _emit(_render_margins(fc, run.format), run)
    return fc


def cmd_scale(run: RunConfig) -> GranularityResult:
    d = _load_inputs(run)
    res = scale_granularity(d, run.window, run.epsilon, run.rule, run.b_min, run.b_max)
    fc = compute_margins(res.stats, run.k)
    if run.format == "json":
        data = res.to_dict()
        data["forecast"] = fc.to_dict()
        text = dumps(data)
    elif run.format == "table":
        text = (
            f"Granularity scaling ({res.rule.value} rule, epsilon = {res.epsilon:g}): chosen b = {res.chosen_b}\n\n"
            + _trace_table(res)
            + "\n"
            + _render_margins(fc, "table")
        )
    else:
        text = _render_margins(fc, run.format)
    _emit(text, run)
    return res


def _gmm_table(model: GmmModel, grid: BinGrid) -> str:
    comps = sorted(model.components, key=lambda c: c.mean)
    rows = [
        [str(i + 1), f"{c.weight:.4f}", _clock(c.mean), f"{c.variance ** 0.5 / 60:.2f}"]
        for i, c in enumerate(comps)
    ]
    mass = bin_mass(model, grid)
    return (
        text_table(["#", "weight", "mean", "stddev (min)"], rows)
        + f"\nlog-likelihood {model.log_likelihood:.4f}, {model.iterations_used} iterations, "
        + ("converged" if model.converged else "not converged")
        + "\n\n"
        + text_table(["Time intervals", "Predicted values"], [[l, f"{m:.4f}"] for l, m in zip(grid.labels(), mass)])
    )


def _clock(seconds: float) -> str:
    s = min(max(int(round(seconds)), 0), 86399)
    return str(TimeOfDay(s))


def cmd_fit_gmm(run: RunConfig) -> GmmModel:
    d = trim_range(_load_inputs(run), run.window)
    grid = BinGrid(run.window, run.bins)
    model = fit_em(d.seconds(), run.em, run.window)
    if run.format == "json":
        text = dumps(gmm_artifact(model, grid))
    elif run.format == "csv":
        text = _csv_text(["interval", "mass"], [[l, repr(float(m))] for l, m in zip(grid.labels(), bin_mass(model, grid))])
    elif run.format == "svg":
        text = bin_share_chart(bin_mass(model, grid), grid, f"GMM bin shares (K={len(model.components)})")
    else:
        text = _gmm_table(model, grid)
    _emit(text, run)
    return model


def cmd_evaluate(run: RunConfig):
    model_path = _require(run.model, "--model")
    sm = to_scorable(read_artifact(model_path), model_path.name)
    if run.bins_given and run.bins != sm.grid.bin_count:
        raise GridMismatchError(f"Model has {sm.grid.bin_count} bins but {run.bins} were requested")
    if run.window_given and run.window != sm.grid.window:
        raise GridMismatchError(f"Model window {sm.grid.window} differs from requested window {run.window}")

    reference = None
    if run.test is not None:
        reference = ground_truth_bins(load_dataset(run.test), sm.grid)
    elif sm.kind != "bin-values":
        raise ConfigError("--test is required to evaluate a fitted model")

    report = score(sm.values, sm.grid, run.label or sm.label, reference)
    if run.format == "json":
        text = dumps(report.to_dict())
    elif run.format == "csv":
        header = ["interval", "value", "erf"] + (["reference"] if reference is not None else [])
        rows = []
        for i, label in enumerate(sm.grid.labels()):
            row = [label, repr(float(report.input_values[i])), repr(float(report.erf_values[i]))]
            if reference is not None:
                row.append(repr(float(reference[i])))
            rows.append(row)
        text = _csv_text(header, rows)
    elif run.format == "svg":
        text = report_chart(report)
    else:
        text = render_table(report)
    _emit(text, run)
    return report


def cmd_generate(run: RunConfig) -> None:
    spec = SyntheticSpec(
        window=run.window,
        true_mean=run.synthetic_mean or TimeOfDay.of(7, 30),
        true_stddev=run.synthetic_stddev,
        session_count=run.sessions,
        vehicles_per_session=run.vehicles,
        rng_seed=run.seed,
        session_prefix=run.session_prefix,
    )
    _emit(to_csv_text(generate_synthetic(spec)), run)


def cmd_compare(run: RunConfig):
    train = _load_inputs(run)
    test = load_dataset(_require(run.test, "--test"))
    sweep = sweep_bin_counts(train, test, run.window, run.bin_counts, run.em, run.em_components)
    if run.format == "json":
        text = dumps(sweep.to_dict())
    elif run.format == "csv":
        text = _csv_text(
            ["bins", "components", "gaussian_average_erf", "gaussian_score", "gmm_average_erf", "gmm_score"],
            [
                [
                    p.bin_count,
                    p.components,
                    repr(p.gaussian.average_erf),
                    repr(p.gaussian.normalized_score),
                    repr(p.gmm.average_erf),
                    repr(p.gmm.normalized_score),
                ]
                for p in sweep.points
            ],
        )
    elif run.format == "svg":
        text = sweep_chart(sweep)
    else:
        text = render_sweep(sweep)
    _emit(text, run)
    return sweep


def _numeric(value: Optional[str]) -> float:
    if value is None:
        raise TypeError("missing value")
    try:
        return float(TimeOfDay.parse(value).seconds)
    except TimeFormatError:
        return float(value)


def cmd_correlate(run: RunConfig) -> Dict[str, Optional[float]]:
    path = _require(run.inputs[0] if run.inputs else None, "--input")
    with path.open(encoding="utf-8-sig", newline="") as f:
        reader = csv.DictReader(f)
        rows = list(reader)
        columns = list(reader.fieldnames or [])
    if run.target not in columns:
        raise CsvFormatError(1, run.target, f"{path}: target column not found")
    try:
        target = [_numeric(r[run.target]) for r in rows]
    except (ValueError, TypeError) as e:
        raise CsvFormatError(1, run.target, f"{path}: non-numeric target value ({e})") from e

    results: Dict[str, Optional[float]] = {}
    for col in columns:
        if col == run.target:
            continue
        try:
            values = [_numeric(r[col]) for r in rows]
        except (ValueError, TypeError):
            logging.info(f"Skipping non-numeric column {col!r}")
            continue
        try:
            results[col] = pearson_correlation(values, target)
        except ConstantInputError:
            results[col] = None

    if run.format == "json":
        text = dumps({"kind": "correlation", "target": run.target, "correlations": results})
    elif run.format == "csv":
        text = _csv_text(["feature", "pearson_r"], [[c, "" if r is None else repr(r)] for c, r in results.items()])
    else:
        rows_out = [[c, "constant" if r is None else f"{r:+.4f}"] for c, r in results.items()]
        text = text_table(["Feature", f"Correlation with {run.target}"], rows_out)
    _emit(text, run)
    return results


COMMANDS: Dict[str, Callable[[RunConfig], object]] = {
    "forecast": cmd_forecast,
    "scale": cmd_scale,
    "fit-gmm": cmd_fit_gmm,
    "evaluate": cmd_evaluate,
    "generate": cmd_generate,
    "correlate": cmd_correlate,
    "compare": cmd_compare,
}


def _window_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--window-start", help="Window start HH:MM:SS (default from config, 06:00:00)")
    p.add_argument("--window-end", help="Window end HH:MM:SS, excluded (default from config, 09:00:00)")


def _output_flags(p: argparse.ArgumentParser, formats: Sequence[str] = FORMATS) -> None:
    p.add_argument("--format", choices=list(formats), help="Output format (default from config)")
    p.add_argument("--out", help="Write output to this file instead of standard output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="departcast",
        description="Forecast first daily departures per interval of a morning window",
    )
    parser.add_argument("--config", default="config/default.toml", help="Path to config TOML")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging on standard error")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("forecast", help="Per-interval departure counts with confidence margins")
    p.add_argument(
        "--input", required=True, nargs="+", help="Training CSV(s) (vehicle_id,session_id,start_tm); several are superimposed"
    )
    _window_flags(p)
    p.add_argument("--bins", type=int, help="Number of bins (default from config, 12)")
    p.add_argument("--k", type=float, help="Margin width in standard deviations (default 2)")
    _output_flags(p)

    p = sub.add_parser("scale", help="Pick the finest bin count meeting an epsilon constraint")
    p.add_argument("--input", required=True, nargs="+", help="Training CSV(s); several are superimposed")
    _window_flags(p)
    eps = p.add_mutually_exclusive_group()
    eps.add_argument("--epsilon", type=float, help="Wanted error, in (0, 1]")
    eps.add_argument("--confidence", type=float, help="Confidence value C; epsilon = 1 - C")
    p.add_argument("--rule", choices=["paper", "relative"], help="Constraint reading (default paper)")
    p.add_argument("--b-min", type=int, dest="b_min", help="Smallest bin count tried")
    p.add_argument("--b-max", type=int, dest="b_max", help="Largest bin count tried")
    p.add_argument("--k", type=float, help="Margin width in standard deviations (default 2)")
    _output_flags(p)

    p = sub.add_parser("fit-gmm", help="Fit a 1-D Gaussian mixture by EM and report bin shares")
    p.add_argument("--input", required=True, nargs="+", help="Training CSV(s); several are superimposed")
    _window_flags(p)
    p.add_argument("--bins", type=int, help="Number of bins for the predicted shares")
    p.add_argument("--components", type=int, help="Mixture components K (default = bins)")
    p.add_argument("--seed", type=int, help="Seed for seeded-random initialization")
    p.add_argument("--max-iter", type=int, dest="max_iter", help="EM iteration cap")
    p.add_argument("--tol", type=float, help="Relative log-likelihood tolerance")
    p.add_argument("--variance-floor", type=float, dest="variance_floor", help="Minimum component variance (s^2)")
    p.add_argument("--init", choices=["evenly-spaced", "seeded-random"], help="Initialization strategy")
    _output_flags(p)

    p = sub.add_parser("evaluate", help="Score a model artifact with the Gauss error function")
    p.add_argument("--model", required=True, help="JSON artifact from forecast, scale or fit-gmm, or bin-values")
    p.add_argument("--test", help="Test CSV for ground-truth bins")
    _window_flags(p)
    p.add_argument("--bins", type=int, help="Expected bin count; must match the model")
    p.add_argument("--label", help="Report label")
    _output_flags(p)

    p = sub.add_parser("compare", help="Score both models against a test set across several bin counts")
    p.add_argument("--input", required=True, nargs="+", help="Training CSV(s); several are superimposed")
    p.add_argument("--test", required=True, help="Test CSV for ground-truth bins")
    _window_flags(p)
    p.add_argument("--bin-counts", type=int, nargs="+", dest="bin_counts", help="Bin counts to compare (default 12 18)")
    p.add_argument("--components", type=int, help="Fixed mixture components K (default = each bin count)")
    p.add_argument("--seed", type=int, help="Seed for seeded-random initialization")
    p.add_argument("--max-iter", type=int, dest="max_iter", help="EM iteration cap")
    p.add_argument("--tol", type=float, help="Relative log-likelihood tolerance")
    p.add_argument("--variance-floor", type=float, dest="variance_floor", help="Minimum component variance (s^2)")
    p.add_argument("--init", choices=["evenly-spaced", "seeded-random"], help="Initialization strategy")
    _output_flags(p)

    p = sub.add_parser("generate", help="Write a synthetic departure CSV")
    _window_flags(p)
    p.add_argument("--mean", help="True mean departure HH:MM:SS")
    p.add_argument("--stddev", type=float, help="True standard deviation in seconds")
    p.add_argument("--sessions", type=int, help="Number of sampling sessions")
    p.add_argument("--vehicles", type=int, help="Vehicles per session")
    p.add_argument("--seed", type=int, help="Random seed")
    p.add_argument("--session-prefix", dest="session_prefix", help="Prefix of generated session ids")
    p.add_argument("--out", help="Write the CSV to this file instead of standard output")

    p = sub.add_parser("correlate", help="Pearson correlation of feature columns with a target column")
    p.add_argument("--input", required=True, help="Feature CSV with a header row")
    p.add_argument("--target", help="Target column (default start_tm)")
    _output_flags(p, ("json", "csv", "table"))

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(module)s: %(message)s",
        stream=sys.stderr,
    )

    cfg = load_config(args.config)
    try:
        run = resolve_run_config(args, cfg)
        COMMANDS[args.command](run)
    except NoFeasibleGranularityError as e:
        print(f"error: {e}", file=sys.stderr)
        for t in e.trace:
            mm = "-" if t.min_mean is None else f"{t.min_mean:.4f}"
            print(f"  b={t.bin_count} min_mean={mm} satisfied={t.satisfied} {t.note}".rstrip(), file=sys.stderr)
        return 1
    except (DepartcastError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0
