from __future__ import annotations

import argparse
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

try:
    import tomllib  # py3.11+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib  # type: ignore

from .errors import ConfigError
from .gmm import EmConfig, InitStrategy
from .margins import GranularityRule
from .timeutil import TimeOfDay, TimeWindow

FORMATS = ("json", "csv", "table", "svg")


@dataclass
class WindowConfig:
    start: str = "06:00:00"
    end: str = "09:00:00"


@dataclass
class ForecastConfig:
    bins: int = 12
    k: float = 2.0


@dataclass
class ScalingConfig:
    epsilon: float = 0.05
    rule: str = "paper"  # "paper" or "relative"
    b_min: int = 1
    b_max: int = 36


@dataclass
class EmSettings:
    components: int = 0  # 0 = same as forecast.bins
    max_iterations: int = 500
    tolerance: float = 1e-8
    variance_floor: float = 1.0
    init: str = "evenly-spaced"
    seed: int = 0


@dataclass
class SyntheticConfig:
    mean: str = "07:30:00"
    stddev: float = 1800.0
    sessions: int = 4
    vehicles: int = 50
    seed: int = 42
    session_prefix: str = "S"


@dataclass
class CompareConfig:
    bin_counts: List[int] = field(default_factory=lambda: [12, 18])


@dataclass
class OutputConfig:
    format: str = "table"


@dataclass
class AppConfig:
    window: WindowConfig = field(default_factory=WindowConfig)
    forecast: ForecastConfig = field(default_factory=ForecastConfig)
    scaling: ScalingConfig = field(default_factory=ScalingConfig)
    em: EmSettings = field(default_factory=EmSettings)
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    compare: CompareConfig = field(default_factory=CompareConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    config_path: Optional[Path] = None

    def save(self, path: Optional[Path | str] = None) -> None:
        import tomli_w
        target = path or self.config_path
        if target is None:
            raise ConfigError("No path given to save the configuration to")
        p = Path(target).expanduser().resolve()
        data = asdict(self)
        data.pop("config_path", None)
        p.write_text(tomli_w.dumps(data), encoding="utf-8")


def _get(d: Dict[str, Any], *keys: str, default: Any = None) -> Any:
    cur: Any = d
    for k in keys:
        if not isinstance(cur, dict) or k not in cur:
            return default
        cur = cur[k]
    return cur


def load_config(path: str | Path) -> AppConfig:
    p = Path(path).expanduser().resolve()
    try:
        data = tomllib.loads(p.read_text(encoding="utf-8"))
    except FileNotFoundError:
        logging.warning(f"Config file not found: {p}. Using defaults.")
        data = {}
    except Exception as e:
        logging.warning(f"Error loading config {p}: {e}. Using defaults.")
        data = {}

    cfg = AppConfig()
    cfg.config_path = p

    cfg.window.start = str(_get(data, "window", "start", default=cfg.window.start))
    cfg.window.end = str(_get(data, "window", "end", default=cfg.window.end))

    cfg.forecast.bins = int(_get(data, "forecast", "bins", default=cfg.forecast.bins))
    cfg.forecast.k = float(_get(data, "forecast", "k", default=cfg.forecast.k))

    cfg.scaling.epsilon = float(_get(data, "scaling", "epsilon", default=cfg.scaling.epsilon))
    cfg.scaling.rule = str(_get(data, "scaling", "rule", default=cfg.scaling.rule))
    cfg.scaling.b_min = int(_get(data, "scaling", "b_min", default=cfg.scaling.b_min))
    cfg.scaling.b_max = int(_get(data, "scaling", "b_max", default=cfg.scaling.b_max))

    cfg.em.components = int(_get(data, "em", "components", default=cfg.em.components))
    cfg.em.max_iterations = int(_get(data, "em", "max_iterations", default=cfg.em.max_iterations))
    cfg.em.tolerance = float(_get(data, "em", "tolerance", default=cfg.em.tolerance))
    cfg.em.variance_floor = float(_get(data, "em", "variance_floor", default=cfg.em.variance_floor))
    cfg.em.init = str(_get(data, "em", "init", default=cfg.em.init))
    cfg.em.seed = int(_get(data, "em", "seed", default=cfg.em.seed))

    cfg.synthetic.mean = str(_get(data, "synthetic", "mean", default=cfg.synthetic.mean))
    cfg.synthetic.stddev = float(_get(data, "synthetic", "stddev", default=cfg.synthetic.stddev))
    cfg.synthetic.sessions = int(_get(data, "synthetic", "sessions", default=cfg.synthetic.sessions))
    cfg.synthetic.vehicles = int(_get(data, "synthetic", "vehicles", default=cfg.synthetic.vehicles))
    cfg.synthetic.seed = int(_get(data, "synthetic", "seed", default=cfg.synthetic.seed))
    cfg.synthetic.session_prefix = str(_get(data, "synthetic", "session_prefix", default=cfg.synthetic.session_prefix))

    cfg.compare.bin_counts = [int(b) for b in _get(data, "compare", "bin_counts", default=cfg.compare.bin_counts)]

    cfg.output.format = str(_get(data, "output", "format", default=cfg.output.format))

    return cfg


@dataclass
class RunConfig:
    """Settings of one CLI invocation: config file values overridden by flags."""

    command: str
    window: TimeWindow
    format: str = "table"
    out: Optional[Path] = None
    inputs: List[Path] = field(default_factory=list)
    test: Optional[Path] = None
    model: Optional[Path] = None
    bins: int = 12
    bins_given: bool = False
    window_given: bool = False
    k: float = 2.0
    epsilon: float = 0.05
    rule: GranularityRule = GranularityRule.PAPER_LITERAL
    b_min: int = 1
    b_max: int = 36
    em: EmConfig = field(default_factory=EmConfig)
    em_components: int = 0
    bin_counts: List[int] = field(default_factory=lambda: [12, 18])
    synthetic_mean: Optional[TimeOfDay] = None
    synthetic_stddev: float = 1800.0
    sessions: int = 4
    vehicles: int = 50
    seed: int = 42
    session_prefix: str = "S"
    target: str = "start_tm"
    label: str = ""


def _pick(args: argparse.Namespace, name: str, fallback: Any) -> Any:
    value = getattr(args, name, None)
    return fallback if value is None else value


def resolve_run_config(args: argparse.Namespace, cfg: AppConfig) -> RunConfig:
    command = args.command
    start = _pick(args, "window_start", cfg.window.start)
    end = _pick(args, "window_end", cfg.window.end)
    window = TimeWindow.parse(start, end)

    fmt = _pick(args, "format", cfg.output.format)
    if fmt not in FORMATS:
        raise ConfigError(f"Unknown output format {fmt!r} (use one of {', '.join(FORMATS)})")

    run = RunConfig(command=command, window=window, format=fmt)
    run.window_given = getattr(args, "window_start", None) is not None or getattr(args, "window_end", None) is not None
    for name in ("out", "test", "model"):
        value = getattr(args, name, None)
        setattr(run, name, Path(value) if value else None)
    raw_inputs = getattr(args, "input", None) or []
    if isinstance(raw_inputs, str):
        raw_inputs = [raw_inputs]
    run.inputs = [Path(p) for p in raw_inputs]

    run.bins_given = getattr(args, "bins", None) is not None
    run.bins = int(_pick(args, "bins", cfg.forecast.bins))
    if run.bins < 1:
        raise ConfigError(f"--bins must be positive, got {run.bins}")
    run.k = float(_pick(args, "k", cfg.forecast.k))
    if run.k < 0:
        raise ConfigError(f"--k must be non-negative, got {run.k}")

    confidence = getattr(args, "confidence", None)
    if confidence is not None:
        if not 0.0 <= confidence < 1.0:
            raise ConfigError(f"--confidence must lie in [0, 1), got {confidence}")
        run.epsilon = 1.0 - float(confidence)
    else:
        run.epsilon = float(_pick(args, "epsilon", cfg.scaling.epsilon))
    if command == "scale" and not 0.0 < run.epsilon <= 1.0:
        raise ConfigError(f"epsilon must lie in (0, 1], got {run.epsilon}")
    run.rule = GranularityRule.parse(_pick(args, "rule", cfg.scaling.rule))
    run.b_min = int(_pick(args, "b_min", cfg.scaling.b_min))
    run.b_max = int(_pick(args, "b_max", cfg.scaling.b_max))
    if command == "scale" and not 1 <= run.b_min <= run.b_max:
        raise ConfigError(f"Need 1 <= b_min <= b_max, got b_min={run.b_min}, b_max={run.b_max}")

    run.em_components = int(_pick(args, "components", cfg.em.components))
    if run.em_components < 0:
        raise ConfigError(f"--components must be non-negative, got {run.em_components}")
    components = run.em_components or run.bins
    run.em = EmConfig(
        component_count=components,
        max_iterations=int(_pick(args, "max_iter", cfg.em.max_iterations)),
        rel_loglik_tolerance=float(_pick(args, "tol", cfg.em.tolerance)),
        variance_floor=float(_pick(args, "variance_floor", cfg.em.variance_floor)),
        init_strategy=InitStrategy.parse(_pick(args, "init", cfg.em.init)),
        rng_seed=int(_pick(args, "seed", cfg.em.seed)),
    )
    if command in ("fit-gmm", "compare"):
        run.em.validate()

    if command == "compare":
        run.bin_counts = sorted({int(b) for b in _pick(args, "bin_counts", cfg.compare.bin_counts)})
        if not run.bin_counts or run.bin_counts[0] < 1:
            raise ConfigError(f"--bin-counts needs positive bin counts, got {run.bin_counts}")

    if command == "generate":
        run.synthetic_mean = TimeOfDay.parse(_pick(args, "mean", cfg.synthetic.mean))
        run.synthetic_stddev = float(_pick(args, "stddev", cfg.synthetic.stddev))
        run.sessions = int(_pick(args, "sessions", cfg.synthetic.sessions))
        run.vehicles = int(_pick(args, "vehicles", cfg.synthetic.vehicles))
        run.seed = int(_pick(args, "seed", cfg.synthetic.seed))
        run.session_prefix = str(_pick(args, "session_prefix", cfg.synthetic.session_prefix))

    run.target = str(_pick(args, "target", run.target))
    run.label = str(_pick(args, "label", ""))
    return run
