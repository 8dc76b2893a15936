"""Posterior sample sets, run configuration and their files."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..sim.model import PARAM_NAMES, ModelParams

KERNELS = ("exponential", "indicator")


@dataclass
class AbcConfig:
    """Settings for a population run (SABC) or a rejection run.

    SABC tolerances live on the probability scale of the distance energy (the
    empirical prior CDF of the distance). ``epsilon0 = None`` starts from the
    median energy of the initial population (0.5); afterwards ``epsilon``
    follows the ``quantile`` of the current energies, never increasing and never
    below ``epsilon_min``. ``budget`` caps the number
    of candidate simulations in rejection ABC.
    """

    n_samples: int = 510
    n_iterations: int = 20
    epsilon0: float | None = None
    quantile: float = 0.5
    epsilon_min: float = 1e-6
    kernel: str = "exponential"
    cov_factor: float = 2.0
    max_redraws: int = 1000
    budget: int | None = None
    batch_size: int = 512
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> AbcConfig:
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        if self.n_iterations < 0:
            raise ValueError("n_iterations must be non-negative")
        if self.epsilon0 is not None and not self.epsilon0 > 0:
            raise ValueError("epsilon0 must be positive")
        if not 0 < self.quantile <= 1:
            raise ValueError("quantile must lie in (0, 1]")
        if not self.epsilon_min > 0:
            raise ValueError("epsilon_min must be positive")
        if self.kernel not in KERNELS:
            raise ValueError(f"kernel must be one of {KERNELS}")
        if not self.cov_factor > 0:
            raise ValueError("cov_factor must be positive")
        if self.budget is not None and self.budget < 1:
            raise ValueError("budget must be positive")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> AbcConfig:
        return cls(**d)


@dataclass
class PosteriorSamples:
    """Accepted parameter vectors with their distances and run provenance."""

    samples: np.ndarray
    distances: np.ndarray
    names: tuple = PARAM_NAMES
    weights: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
        self.distances = np.asarray(self.distances, dtype=float).ravel()
        self.names = tuple(self.names)
        if self.samples.shape[0] and self.samples.shape[1] != len(self.names):
            raise ValueError("one name per parameter column required")
        if self.distances.size != self.samples.shape[0]:
            raise ValueError("one distance per sample required")
        if self.weights is None:
            n = max(self.samples.shape[0], 1)
            self.weights = np.full(self.samples.shape[0], 1.0 / n)
        self.weights = np.asarray(self.weights, dtype=float)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return len(self.names)

    def mean(self) -> np.ndarray:
        return np.average(self.samples, axis=0, weights=self.weights)

    def std(self) -> np.ndarray:
        m = self.mean()
        return np.sqrt(np.average((self.samples - m) ** 2, axis=0, weights=self.weights))

    def as_params(self) -> list:
        return [ModelParams.unchecked(row) for row in self.samples]

    # files -------------------------------------------------------------

    def save(self, path) -> None:
        """CSV of parameters and distance, plus a JSON file with weights and provenance."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(self.names) + ["distance"])
            for row, d in zip(self.samples, self.distances):
                w.writerow([repr(float(v)) for v in row] + [repr(float(d))])
        meta = {"weights": self.weights.tolist(), "provenance": self.provenance}
        path.with_suffix(".json").write_text(json.dumps(meta, indent=1, sort_keys=True, default=_json_default) + "\n")

    @classmethod
    def load(cls, path) -> PosteriorSamples:
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if not header or header[-1] != "distance":
                raise ValueError(f"{path}: last column must be 'distance'")
            rows = [[float(v) for v in r] for r in reader if r]
        arr = np.array(rows, dtype=float).reshape(-1, len(header))
        side = path.with_suffix(".json")
        weights, prov = None, {}
        if side.exists():
            meta = json.loads(side.read_text())
            weights = np.asarray(meta.get("weights"), dtype=float) if meta.get("weights") is not None else None
            prov = meta.get("provenance", {})
        return cls(arr[:, :-1], arr[:, -1], tuple(header[:-1]), weights, prov)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")
