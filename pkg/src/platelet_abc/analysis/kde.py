"""Whitened Gaussian kernel density and its mode (MAP estimate)."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

DEFAULT_BANDWIDTH = 0.45
_CHUNK = 2048
LOG_DENSITY_FLOOR = -1e300


class WhitenedKDE:
    """Product-Gaussian KDE on per-dimension standardized coordinates.

    Densities are reported for the whitened coordinates, so they are invariant to
    per-coordinate affine changes of the inputs. Dimensions with zero spread keep
    a unit scale (a warning is issued).
    """

    def __init__(self, samples, bandwidth: float = DEFAULT_BANDWIDTH):
        X = np.asarray(samples, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[0] < 1:
            raise ValueError("no samples")
        if not bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if not np.all(np.isfinite(X)):
            raise ValueError("samples contain non-finite values")
        self.center = X.mean(axis=0)
        sd = X.std(axis=0, ddof=1) if X.shape[0] > 1 else np.zeros(X.shape[1])
        flat = ~(sd > 0)
        if np.any(flat):
            warnings.warn(f"zero sample spread in dimension(s) {np.flatnonzero(flat).tolist()}; "
                          "using unit scale there", RuntimeWarning, stacklevel=2)
        self.scale = np.where(flat, 1.0, sd)
        self.Z = (X - self.center) / self.scale
        self.h = float(bandwidth)
        self._norm = -math.log(self.Z.shape[0]) - self.Z.shape[1] * math.log(self.h * math.sqrt(2 * math.pi))

    @property
    def dim(self) -> int:
        return self.Z.shape[1]

    def whiten(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.center) / self.scale

    def unwhiten(self, z) -> np.ndarray:
        return np.asarray(z, dtype=float) * self.scale + self.center

    def log_density_whitened(self, z) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        out = np.empty(z.shape[0])
        for s in range(0, z.shape[0], _CHUNK):
            zz = z[s:s + _CHUNK]
            q = np.zeros((zz.shape[0], self.Z.shape[0]))
            with np.errstate(over="ignore"):
                for k in range(self.dim):
                    q += (zz[:, k:k + 1] - self.Z[None, :, k]) ** 2
            out[s:s + _CHUNK] = logsumexp(-0.5 * q / self.h**2, axis=1) + self._norm
        # far tails (or overflowing distances) stay finite
        return np.maximum(out, LOG_DENSITY_FLOOR)

    def log_density(self, x):
        """Log density at points given in the original coordinates."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 0 if self.dim == 1 else x.ndim == 1
        out = self.log_density_whitened(self.whiten(x.reshape(-1, self.dim)))
        return float(out[0]) if single else out


def kde_log_density(samples, point, bandwidth: float = DEFAULT_BANDWIDTH) -> float:
    return WhitenedKDE(samples, bandwidth).log_density(point)


@dataclass
class MapEstimate:
    theta: np.ndarray
    bandwidth: float
    start: np.ndarray
    log_density: float
    start_log_density: float
    n_iter: int
    n_eval: int
    converged: bool
    names: tuple = ()
    log_scale: tuple = ()
    message: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "theta": self.theta.tolist(),
            "names": list(self.names),
            "bandwidth": self.bandwidth,
            "start": self.start.tolist(),
            "log_density": self.log_density,
            "start_log_density": self.start_log_density,
            "n_iter": self.n_iter,
            "n_eval": self.n_eval,
            "converged": self.converged,
            "log_scale": list(self.log_scale),
            "message": self.message,
            **self.extra,
        }

    @classmethod
    def from_dict(cls, d: dict) -> MapEstimate:
        keys = ("theta", "names", "bandwidth", "start", "log_density", "start_log_density",
                "n_iter", "n_eval", "converged", "log_scale", "message")
        extra = {k: v for k, v in d.items() if k not in keys}
        return cls(np.asarray(d["theta"], float), d["bandwidth"], np.asarray(d["start"], float),
                   d["log_density"], d["start_log_density"], d["n_iter"], d["n_eval"], d["converged"],
                   tuple(d.get("names", ())), tuple(d.get("log_scale", ())), d.get("message", ""), extra)


def map_estimate(samples, bandwidth: float = DEFAULT_BANDWIDTH, bounds=None, log_scale=None,
                 names=(), simplex_edge: float = 0.1, xatol: float = 1e-8, maxfev: int = 10_000) -> MapEstimate:
    """Mode of the whitened KDE found by Nelder-Mead.

    ``log_scale`` marks coordinates handled as logarithms (the KDE is built and the
    search runs on that scale; the result is mapped back). ``bounds`` is an optional
    ``(lower, upper)`` box in original units; points outside it score ``-inf``.
    The search starts at the sample with the highest density, with an initial
    simplex of edge ``simplex_edge`` along each whitened axis, and stops when the
    simplex is smaller than ``xatol`` (whitened units) or after ``maxfev``
    evaluations.
    """
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    d = X.shape[1]
    mask = np.zeros(d, bool) if log_scale is None else np.asarray(log_scale, bool)
    Y = np.where(mask, np.log(np.where(mask, X, 1.0)), X)
    kde = WhitenedKDE(Y, bandwidth)
    if bounds is not None:
        lo, hi = (np.asarray(b, dtype=float) for b in bounds)
        lo = np.where(mask, np.log(np.where(mask, lo, 1.0)), lo)
        hi = np.where(mask, np.log(np.where(mask, hi, 1.0)), hi)
        zlo, zhi = kde.whiten(lo), kde.whiten(hi)
    else:
        zlo = zhi = None

    dens = kde.log_density_whitened(kde.Z)
    i0 = int(np.argmax(dens))
    z0 = kde.Z[i0].copy()

    def objective(z):
        if zlo is not None and (np.any(z < zlo) or np.any(z > zhi)):
            return np.inf
        return -kde.log_density_whitened(z)[0]

    simplex = np.vstack([z0, z0 + simplex_edge * np.eye(d)])
    if zlo is not None:
        # keep the initial simplex inside the box by flipping edges that leave it
        for k in range(d):
            if simplex[k + 1, k] > zhi[k]:
                simplex[k + 1, k] = z0[k] - simplex_edge
    res = minimize(objective, z0, method="Nelder-Mead",
                   options={"initial_simplex": simplex, "xatol": xatol, "fatol": np.inf,
                            "maxfev": maxfev, "maxiter": maxfev})
    z_best = res.x if res.fun <= dens[i0] * -1 else z0
    best_ld = -float(objective(z_best))
    y = kde.unwhiten(z_best)
    theta = np.where(mask, np.exp(y), y)
    # coordinates without spread: every sample agrees, so that value is the mode
    flat = np.ptp(Y, axis=0) == 0
    theta = np.where(flat, X[0], theta)
    return MapEstimate(
        theta=theta, bandwidth=float(bandwidth), start=np.where(mask, np.exp(kde.unwhiten(z0)), kde.unwhiten(z0)),
        log_density=best_ld, start_log_density=float(dens[i0]), n_iter=int(res.nit), n_eval=int(res.nfev),
        converged=bool(res.success), names=tuple(names), log_scale=tuple(bool(m) for m in mask),
        message=str(res.message),
    )
