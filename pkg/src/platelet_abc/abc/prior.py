"""Uniform box priors and the inference-scale transform."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import rng as crng
from ..sim.model import PARAM_NAMES, ModelParams


@dataclass(frozen=True)
class Prior:
    """Independent uniforms on ``[lower, upper]`` (original units).

    ``log_scale`` marks components that inference handles on the log scale
    (proposals, density smoothing). The prior itself stays uniform in original
    units; moving to the log scale contributes a Jacobian term.
    """

    lower: tuple
    upper: tuple
    names: tuple = ()
    log_scale: tuple = ()

    def __post_init__(self):
        lo = tuple(float(v) for v in np.ravel(self.lower))
        hi = tuple(float(v) for v in np.ravel(self.upper))
        if self.names:
            names = tuple(self.names)
        elif len(lo) == len(PARAM_NAMES):
            names = PARAM_NAMES
        else:
            names = tuple(f"theta_{i}" for i in range(len(lo)))
        mask = tuple(bool(v) for v in self.log_scale) if len(self.log_scale) else (False,) * len(lo)
        if not (len(lo) == len(hi) == len(names) == len(mask)) or not lo:
            raise ValueError("bounds, names and log_scale must have the same nonzero length")
        for name, a, b, m in zip(names, lo, hi, mask):
            if not (np.isfinite(a) and np.isfinite(b)):
                raise ValueError(f"{name}: bounds must be finite")
            if not a < b:
                raise ValueError(f"{name}: lower bound {a} must be below upper bound {b}")
            if m and a <= 0:
                raise ValueError(f"{name}: log-scaled bounds must be positive")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "log_scale", mask)

    # construction ------------------------------------------------------

    @classmethod
    def default(cls) -> Prior:
        """Broad box for full-scale synthetic studies (original units)."""
        return cls(
            lower=(1.0, 1.0, 0.1, 1e-4, 0.1, 1e-6, 1e-6),
            upper=(300.0, 300.0, 10.0, 10.0, 20.0, 1e-3, 1e-3),
            names=PARAM_NAMES,
            log_scale=(False, False, False, False, False, True, True),
        )

    @classmethod
    def unit(cls, dim: int, names=None) -> Prior:
        return cls((0.0,) * dim, (1.0,) * dim, tuple(names) if names else ())

    # basic queries -----------------------------------------------------

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.upper)

    @property
    def mask(self) -> np.ndarray:
        return np.array(self.log_scale, dtype=bool)

    def contains(self, theta):
        t = np.asarray(theta, dtype=float)
        inside = np.all((t >= self.lo) & (t <= self.hi), axis=-1)
        return bool(inside) if inside.ndim == 0 else inside

    def log_density(self, theta):
        inside = self.contains(theta)
        logv = -float(np.sum(np.log(self.hi - self.lo)))
        return np.where(inside, logv, -np.inf)

    # sampling ----------------------------------------------------------

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        shape = (self.dim,) if size is None else (size, self.dim)
        return self.lo + (self.hi - self.lo) * rng.random(shape)

    def sample_streams(self, seed: int, streams, counter: int = 0) -> np.ndarray:
        """One draw per stream from the counter-based generator (lane ``k`` for component ``k``)."""
        streams = np.atleast_1d(streams)
        u = np.column_stack([crng.uniforms(seed, streams, counter, k) for k in range(self.dim)])
        return self.lo + (self.hi - self.lo) * u

    # inference scale ---------------------------------------------------

    def to_inference(self, theta) -> np.ndarray:
        t = np.asarray(theta, dtype=float)
        return np.where(self.mask, np.log(np.where(self.mask, t, 1.0)), t)

    def from_inference(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.where(self.mask, np.exp(np.where(self.mask, u, 0.0)), u)

    def log_jacobian(self, u) -> np.ndarray:
        """``log |d theta / d u|`` for the log-scaled components."""
        u = np.asarray(u, dtype=float)
        return np.sum(np.where(self.mask, u, 0.0), axis=-1)

    def inference_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.to_inference(self.lo), self.to_inference(self.hi)

    # persistence -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "lower": list(self.lower),
            "upper": list(self.upper),
            "log_scale": list(self.log_scale),
        }

    @classmethod
    def from_dict(cls, d: dict) -> Prior:
        return cls(tuple(d["lower"]), tuple(d["upper"]), tuple(d.get("names", ())),
                   tuple(d.get("log_scale", ())))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> Prior:
        return cls.from_dict(json.loads(Path(path).read_text()))


def sample_prior(prior: Prior, rng: np.random.Generator) -> ModelParams:
    """One uniform draw from a seven-parameter prior as ``ModelParams``."""
    if prior.dim != len(PARAM_NAMES):
        raise ValueError("sample_prior needs a prior over the seven model parameters")
    return ModelParams.unchecked(prior.sample(rng))
