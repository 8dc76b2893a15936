"""Posterior predictive bands."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import rng as crng
from ..abc.engine import run_simulations
from ..abc.samples import PosteriorSamples
from ..analysis.stats import energy_scores_by_observable, quantile
from ..sim.simulator import OBSERVABLES

QUANTILE_CONVENTION = "linear interpolation between order statistics at q*(n-1)"


@dataclass
class PredictiveBands:
    """Quantile bands per (time, observable); arrays are ``(n_times, n_observables)``."""

    times: np.ndarray
    lower: np.ndarray
    median: np.ndarray
    upper: np.ndarray
    level: float
    draws: np.ndarray

    def inside(self, x_obs) -> np.ndarray:
        x = np.asarray(x_obs, dtype=float).reshape(self.median.shape)
        return (x >= self.lower) & (x <= self.upper)

    def coverage(self, x_obs) -> int:
        return int(self.inside(x_obs).sum())

    def energy_scores(self, x_obs, beta: float = 1.0, normalized: bool = False) -> np.ndarray:
        return energy_scores_by_observable(self.draws, x_obs, len(self.times), beta, normalized)

    def rows(self) -> list:
        """``(t, observable, lower, median, upper)`` records."""
        out = []
        for i, t in enumerate(self.times):
            for k, name in enumerate(OBSERVABLES[: self.median.shape[1]]):
                out.append((float(t), name, float(self.lower[i, k]), float(self.median[i, k]),
                            float(self.upper[i, k])))
        return out


def posterior_predictive(posterior: PosteriorSamples, simulate, n_draws: int = 500, level: float = 0.95,
                         seed: int = 0, times=(20.0, 120.0, 300.0), pool=None) -> PredictiveBands:
    """Simulate ``n_draws`` traces from posterior draws and take pointwise quantile bands.

    Draw ``j`` picks a posterior sample by inverse-CDF on the weights with the
    counter generator (stream ``j``) and simulates with its own derived seed.
    """
    if len(posterior) == 0:
        raise ValueError("empty posterior")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    idx = np.arange(n_draws)
    u = crng.uniforms(seed, idx, 0, 0)
    cdf = np.cumsum(posterior.weights)
    cdf /= cdf[-1]
    pick = np.minimum(np.searchsorted(cdf, u, side="right"), len(posterior) - 1)
    thetas = posterior.samples[pick]
    seeds = crng.derive_seeds(seed, idx, 0, 1)
    X = run_simulations(simulate, thetas, seeds, pool)
    n_t = len(times)
    Xr = X.reshape(n_draws, n_t, -1)
    a = (1 - level) / 2
    lo = np.empty(Xr.shape[1:])
    med = np.empty(Xr.shape[1:])
    hi = np.empty(Xr.shape[1:])
    for i in range(n_t):
        for k in range(Xr.shape[2]):
            lo[i, k], med[i, k], hi[i, k] = quantile(Xr[:, i, k], [a, 0.5, 1 - a])
    return PredictiveBands(np.asarray(times, dtype=float), lo, med, hi, level, X)
