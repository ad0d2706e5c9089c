"""JSON hand-off between CLI stages.

Every artifact is a JSON object with a ``kind`` field; see docs/json_schemas.md.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from .errors import ArtifactError
from .gmm import GmmModel, bin_mass
from .margins import GranularityResult, MarginForecast, compute_margins
from .timeutil import BinGrid

KINDS = ("margin-forecast", "granularity-result", "gmm-model", "bin-values")


def _clean(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if not math.isfinite(f):
            return None
        return f
    return obj


def dumps(obj: Dict[str, Any]) -> str:
    """Stable JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


@dataclass(frozen=True)
class ScorableModel:
    """Anything evaluation can score: a grid and one normalized value per bin."""

    kind: str
    grid: BinGrid
    values: np.ndarray
    label: str


def gmm_artifact(model: GmmModel, grid: BinGrid) -> Dict[str, Any]:
    data = model.to_dict()
    data["grid"] = grid.to_dict()
    data["bin_mass"] = [
        {"interval": label, "mass": float(m)} for label, m in zip(grid.labels(), bin_mass(model, grid))
    ]
    return data


def bin_values_artifact(values: Any, grid: BinGrid, label: str = "") -> Dict[str, Any]:
    return {"kind": "bin-values", "grid": grid.to_dict(), "values": [float(v) for v in values], "label": label}


def read_artifact(path: Union[str, Path]) -> Dict[str, Any]:
    p = Path(path)
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ArtifactError(f"{p}: not valid JSON ({e})") from e
    if not isinstance(data, dict) or data.get("kind") not in KINDS:
        raise ArtifactError(f"{p}: expected one of {', '.join(KINDS)} artifacts")
    return data


def to_scorable(data: Dict[str, Any], source: Optional[str] = None) -> ScorableModel:
    """Per-bin normalized values of a model artifact."""
    kind = data.get("kind")
    name = source or kind or "model"
    try:
        if kind == "margin-forecast":
            fc = MarginForecast.from_dict(data)
            return ScorableModel(kind, fc.grid, fc.normalized_means(), f"approximated Gaussian ({name})")
        if kind == "granularity-result":
            res = GranularityResult.from_dict(data)
            fc = compute_margins(res.stats)
            return ScorableModel(kind, fc.grid, fc.normalized_means(), f"approximated Gaussian, b={res.chosen_b} ({name})")
        if kind == "gmm-model":
            model = GmmModel.from_dict(data)
            grid = BinGrid.from_dict(data["grid"])
            return ScorableModel(kind, grid, bin_mass(model, grid), f"GMM, K={len(model.components)} ({name})")
        if kind == "bin-values":
            grid = BinGrid.from_dict(data["grid"])
            values = np.asarray(data["values"], dtype=np.float64)
            return ScorableModel(kind, grid, values, str(data.get("label") or name))
    except (KeyError, TypeError) as e:
        raise ArtifactError(f"{name}: malformed {kind} artifact ({e})") from e
    raise ArtifactError(f"{name}: unsupported artifact kind {kind!r}")
