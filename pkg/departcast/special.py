from __future__ import annotations

import math
from typing import Union

import numpy as np
from scipy import special as sp_special

from .errors import DepartcastError

ArrayLike = Union[float, np.ndarray]


def _require_finite(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise DepartcastError("erf requires finite input")


def erf_array(x: ArrayLike) -> np.ndarray:
    """Elementwise standard error function, (2/sqrt(pi)) * integral_0^x exp(-t^2) dt."""
    arr = np.asarray(x, dtype=np.float64)
    _require_finite(arr)
    return np.asarray(sp_special.erf(arr), dtype=np.float64)


def erf(x: float) -> float:
    if not math.isfinite(x):
        raise DepartcastError(f"erf requires finite input, got {x!r}")
    return float(sp_special.erf(x))


def normal_cdf(z: ArrayLike) -> np.ndarray:
    """Standard normal CDF; infinite arguments map to 0 or 1."""
    return np.asarray(sp_special.ndtr(np.asarray(z, dtype=np.float64)), dtype=np.float64)


def normal_sf(z: ArrayLike) -> np.ndarray:
    """Upper tail 1 - CDF, computed without cancellation."""
    return np.asarray(sp_special.ndtr(-np.asarray(z, dtype=np.float64)), dtype=np.float64)


def coverage(k: float) -> float:
    """Two-sided probability mass of a normal within k standard deviations."""
    return erf(k / math.sqrt(2.0))


def k_for_coverage(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise DepartcastError(f"coverage level must lie in (0, 1), got {level}")
    return float(math.sqrt(2.0) * sp_special.erfinv(level))
