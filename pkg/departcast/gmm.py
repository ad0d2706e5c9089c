"""One-dimensional Gaussian mixture over departure times, fitted by EM.

Times are seconds since midnight. A fitted mixture is turned into per-bin
predicted shares by integrating each component's CDF over the bin and
renormalizing over the window.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, EmFitError, MixtureMassError
from .special import normal_cdf, normal_sf
from .timeutil import BinGrid, TimeWindow

_LOG_2PI = math.log(2.0 * math.pi)


class InitStrategy(str, enum.Enum):
    EVENLY_SPACED = "evenly-spaced"
    SEEDED_RANDOM = "seeded-random"

    @classmethod
    def parse(cls, value: "str | InitStrategy") -> "InitStrategy":
        try:
            return cls(value)
        except ValueError:
            raise ConfigError(f"Unknown init strategy {value!r} (use 'evenly-spaced' or 'seeded-random')")


@dataclass
class EmConfig:
    component_count: int = 12
    max_iterations: int = 500
    rel_loglik_tolerance: float = 1e-8
    variance_floor: float = 1.0
    init_strategy: InitStrategy = InitStrategy.EVENLY_SPACED
    rng_seed: int = 0

    def validate(self) -> None:
        if self.component_count < 1:
            raise ConfigError(f"component_count must be >= 1, got {self.component_count}")
        if self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not self.rel_loglik_tolerance > 0:
            raise ConfigError(f"rel_loglik_tolerance must be > 0, got {self.rel_loglik_tolerance}")
        if not self.variance_floor > 0:
            raise ConfigError(f"variance_floor must be > 0, got {self.variance_floor}")
        self.init_strategy = InitStrategy.parse(self.init_strategy)


@dataclass(frozen=True)
class GmmComponent:
    weight: float
    mean: float
    variance: float


@dataclass(frozen=True)
class GmmModel:
    components: Tuple[GmmComponent, ...]
    log_likelihood: float = float("nan")
    iterations_used: int = 0
    converged: bool = False
    loglik_history: Tuple[float, ...] = field(default=(), repr=False)

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components], dtype=np.float64)

    @property
    def means(self) -> np.ndarray:
        return np.array([c.mean for c in self.components], dtype=np.float64)

    @property
    def variances(self) -> np.ndarray:
        return np.array([c.variance for c in self.components], dtype=np.float64)

    def validate(self, variance_floor: float = 0.0) -> None:
        if not self.components:
            raise EmFitError("Mixture needs at least one component")
        w = self.weights
        if np.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-9:
            raise EmFitError(f"Mixture weights must be non-negative and sum to 1, got sum {w.sum()!r}")
        v = self.variances
        if np.any(~np.isfinite(v)) or np.any(v <= 0) or np.any(v < variance_floor):
            raise EmFitError("Mixture variances must be positive and respect the variance floor")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": "gmm-model",
            "components": [
                {"weight": c.weight, "mean": c.mean, "variance": c.variance} for c in self.components
            ],
            "log_likelihood": self.log_likelihood,
            "iterations_used": self.iterations_used,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GmmModel":
        comps = tuple(
            GmmComponent(float(c["weight"]), float(c["mean"]), float(c["variance"])) for c in data["components"]
        )
        ll = data.get("log_likelihood")
        model = cls(
            comps,
            float("nan") if ll is None else float(ll),
            int(data.get("iterations_used", 0)),
            bool(data.get("converged", False)),
        )
        model.validate()
        return model


def _log_gauss(x: np.ndarray, means: np.ndarray, variances: np.ndarray) -> np.ndarray:
    """log N(x | mean, variance) for every point (rows) and component (columns)."""
    diff = x[:, None] - means[None, :]
    return -0.5 * (_LOG_2PI + np.log(variances)[None, :] + diff * diff / variances[None, :])


def _e_step(
    x: np.ndarray, weights: np.ndarray, means: np.ndarray, variances: np.ndarray
) -> Tuple[np.ndarray, float]:
    with np.errstate(divide="ignore"):
        log_w = np.log(weights)
    joint = _log_gauss(x, means, variances) + log_w[None, :]
    norm = logsumexp(joint, axis=1)
    return joint - norm[:, None], float(np.sum(norm))


def _m_step(
    x: np.ndarray,
    resp: np.ndarray,
    means: np.ndarray,
    variances: np.ndarray,
    floor: float,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    nk = resp.sum(axis=0)
    weights = nk / x.size
    alive = nk > 0
    safe = np.where(alive, nk, 1.0)
    new_means = np.where(alive, resp.T @ x / safe, means)
    diff = x[:, None] - new_means[None, :]
    new_vars = np.where(alive, np.sum(resp * diff * diff, axis=0) / safe, variances)
    return weights, new_means, np.maximum(new_vars, floor)


def _initial_params(
    x: np.ndarray, cfg: EmConfig, lo: float, hi: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    k = cfg.component_count
    weights = np.full(k, 1.0 / k)
    if cfg.init_strategy is InitStrategy.EVENLY_SPACED:
        width = (hi - lo) / k
        means = lo + width * (np.arange(k) + 0.5)
        variances = np.full(k, max(width * width, cfg.variance_floor))
    else:
        rng = np.random.default_rng(cfg.rng_seed)
        means = rng.choice(x, size=k, replace=False).astype(np.float64)
        variances = np.full(k, max(float(np.var(x)), cfg.variance_floor))
    return weights, means, variances


def fit_em(
    times: Union[Sequence[float], np.ndarray],
    cfg: Optional[EmConfig] = None,
    window: Optional[TimeWindow] = None,
) -> GmmModel:
    """Fit a K-component mixture to departure times.

    Evenly-spaced initialization spreads the means over ``window`` (or the
    data range when no window is given) with variance equal to the squared
    spacing.
    """
    cfg = cfg or EmConfig()
    cfg.validate()
    x = np.asarray(times, dtype=np.float64).ravel()
    if x.size == 0:
        raise EmFitError("Cannot fit a mixture to an empty sample")
    if not np.all(np.isfinite(x)):
        raise EmFitError("Departure times must be finite")
    if x.size < cfg.component_count:
        raise EmFitError(f"Need at least {cfg.component_count} departures for {cfg.component_count} components, got {x.size}")

    if window is not None:
        lo, hi = float(window.start.seconds), float(window.end.seconds)
    else:
        lo, hi = float(x.min()), float(x.max())

    # fit in coordinates relative to the init span so shifts of the data only move the means
    origin = lo
    xs = x - origin
    weights, means, variances = _initial_params(xs, cfg, 0.0, hi - lo)

    log_resp, ll = _e_step(xs, weights, means, variances)
    history = [ll]
    converged = False
    iterations = 0
    for iterations in range(1, cfg.max_iterations + 1):
        weights, means, variances = _m_step(xs, np.exp(log_resp), means, variances, cfg.variance_floor)
        log_resp, new_ll = _e_step(xs, weights, means, variances)
        history.append(new_ll)
        improvement = (new_ll - ll) / max(abs(ll), 1e-300)
        ll = new_ll
        if improvement < cfg.rel_loglik_tolerance:
            converged = True
            break

    if converged:
        logging.info(f"EM converged after {iterations} iterations, log-likelihood {ll:.6f}")
    else:
        logging.warning(f"EM stopped at max_iterations={cfg.max_iterations} without converging")

    comps = tuple(
        GmmComponent(float(w), float(m + origin), float(v)) for w, m, v in zip(weights, means, variances)
    )
    return GmmModel(comps, ll, iterations, converged, tuple(history))


def responsibilities(model: GmmModel, times: Union[Sequence[float], np.ndarray]) -> np.ndarray:
    """Posterior component membership, one row per departure."""
    x = np.asarray(times, dtype=np.float64).ravel()
    log_resp, _ = _e_step(x, model.weights, model.means, model.variances)
    return np.exp(log_resp)


def density(model: GmmModel, t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    arr = np.asarray(t, dtype=np.float64)
    x = arr.ravel()
    dens = np.exp(_log_gauss(x, model.means, model.variances)) @ model.weights
    if arr.ndim == 0:
        return float(dens[0])
    return dens.reshape(arr.shape)


def bin_mass(model: GmmModel, grid: BinGrid) -> np.ndarray:
    """Share of the mixture falling in each bin, renormalized over the window."""
    edges = grid.edges().astype(np.float64)
    sd = np.sqrt(model.variances)
    z = (edges[None, :] - model.means[:, None]) / sd[:, None]
    lo, hi = z[:, :-1], z[:, 1:]
    # upper tail above the mean keeps precision where both CDF values are near 1
    per_comp = np.where(lo > 0, normal_sf(lo) - normal_sf(hi), normal_cdf(hi) - normal_cdf(lo))
    mass = model.weights @ per_comp
    total = float(mass.sum())
    if total < 1e-12:
        raise MixtureMassError()
    return mass / total


def sample(model: GmmModel, size: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    comp = rng.choice(len(model.components), size=size, p=model.weights)
    return rng.normal(model.means[comp], np.sqrt(model.variances[comp]))
