"""Parameter vector and simulator configuration."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

PARAM_NAMES = ("p_ad", "p_ag", "p_t", "p_f", "a_t", "v_z_ap", "v_z_nap")
PARAM_UNITS = ("1/s", "1/s", "1/s", "1/s", "-", "m/s", "m/s")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    """The seven model parameters, in serialization order.

    ``p_f`` is a rate per unit of normalized albumin coverage and ``a_t`` multiplies
    the normalized coverage inside the exponential attenuation, so both are
    expressed relative to the per-cell albumin capacity.
    """

    p_ad: float
    p_ag: float
    p_t: float
    p_f: float
    a_t: float
    v_z_ap: float
    v_z_nap: float

    def __post_init__(self):
        for name in PARAM_NAMES:
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")

    @classmethod
    def from_array(cls, values) -> ModelParams:
        values = np.asarray(values, dtype=float).ravel()
        if values.size != len(PARAM_NAMES):
            raise ValueError(f"expected {len(PARAM_NAMES)} values, got {values.size}")
        return cls(*(float(v) for v in values))

    @classmethod
    def unchecked(cls, values) -> ModelParams:
        """Build without the positivity check (zero rates switch mechanisms off)."""
        obj = object.__new__(cls)
        for name, v in zip(PARAM_NAMES, np.asarray(values, dtype=float).ravel()):
            object.__setattr__(obj, name, float(v))
        return obj

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in PARAM_NAMES])

    def as_dict(self) -> dict:
        return {n: getattr(self, n) for n in PARAM_NAMES}

    def replace(self, **changes) -> ModelParams:
        values = self.as_dict()
        values.update(changes)
        return ModelParams.unchecked([values[n] for n in PARAM_NAMES])


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class SimConfig:
    """Geometry, discretization and initial conditions.

    Lengths are in metres, densities in particles per microlitre, times in seconds.
    Substrate cells tile the ``lx * ly`` window exactly; their nominal area is
    ``cell_area_um2``.
    """

    lx: float = 1e-3
    ly: float = 1e-3
    lz: float = 0.82e-3
    shear_rate: float = 100.0
    dt: float = 0.01
    nx: int = 448
    ny: int = 448
    cell_area_um2: float = 5.0
    albumin_per_cell: float = 100_000.0
    nap_density: float = 172_200.0
    ap_density: float = 4_808.0
    albumin_density: float = 2.69e13
    particle_scale: float = 1.0
    obs_times: tuple = (20.0, 120.0, 300.0)
    initial_z: tuple = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "obs_times", tuple(float(t) for t in self.obs_times))
        if self.initial_z is not None:
            object.__setattr__(self, "initial_z", tuple(float(z) for z in self.initial_z))

    # derived quantities -------------------------------------------------

    @property
    def rho_max(self) -> float:
        """Albumin capacity per um^2."""
        return self.albumin_per_cell / self.cell_area_um2

    @property
    def cell_side_um(self) -> float:
        return math.sqrt(self.cell_area_um2)

    @property
    def volume_ul(self) -> float:
        return self.lx * self.ly * self.lz * 1e9

    @property
    def area_mm2(self) -> float:
        return self.lx * self.ly * 1e6

    @property
    def n_nap(self) -> int:
        return _round_half_up(self.nap_density * self.volume_ul * self.particle_scale)

    @property
    def n_ap(self) -> int:
        return _round_half_up(self.ap_density * self.volume_ul * self.particle_scale)

    @property
    def horizon(self) -> float:
        return self.obs_times[-1]

    @property
    def obs_steps(self) -> tuple:
        return tuple(_round_half_up(t / self.dt) for t in self.obs_times)

    # construction helpers -----------------------------------------------

    @staticmethod
    def cells_for(length_m: float, cell_area_um2: float = 5.0) -> int:
        return max(1, _round_half_up(length_m * 1e6 / math.sqrt(cell_area_um2)))

    @classmethod
    def desk(cls, **overrides) -> SimConfig:
        """Small, fast configuration used for cohort studies on a workstation.

        A 140 x 140 um window, 0.35 mm high, 2 s time steps, physical particle counts
        and a reduced activated-platelet density so that clusters stay resolvable.
        """
        base = dict(lx=1.4e-4, ly=1.4e-4, lz=3.5e-4, dt=2.0, particle_scale=1.0, ap_density=50000.0,
                    shear_rate=100.0)
        base.update(overrides)
        side = base.get("cell_area_um2", 5.0)
        base.setdefault("nx", cls.cells_for(base["lx"], side))
        base.setdefault("ny", cls.cells_for(base["ly"], side))
        return cls(**base)

    def replace(self, **changes) -> SimConfig:
        return dataclasses.replace(self, **changes)

    def with_initial_densities(self, nap_density: float, ap_density: float) -> SimConfig:
        return self.replace(nap_density=float(nap_density), ap_density=float(ap_density))

    # validation / serialization ----------------------------------------

    def validate(self) -> SimConfig:
        for name in ("lx", "ly", "lz", "dt", "cell_area_um2", "albumin_per_cell"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.shear_rate < 0:
            raise ConfigError("shear_rate must be non-negative")
        if self.nx < 1 or self.ny < 1:
            raise ConfigError("grid must have at least one cell per axis")
        side_m = self.cell_side_um * 1e-6
        for n, length, axis in ((self.nx, self.lx, "x"), (self.ny, self.ly, "y")):
            if abs(n * side_m - length) > side_m:
                raise ConfigError(
                    f"{n} cells of side {self.cell_side_um:.4g} um do not cover the {axis} "
                    f"extent {length * 1e6:.4g} um to within one cell"
                )
        if min(self.nap_density, self.ap_density) < 0:
            raise ConfigError("initial densities must be non-negative")
        if not self.particle_scale > 0:
            raise ConfigError("particle_scale must be positive")
        if self.n_nap + self.n_ap == 0:
            raise ConfigError("no particles after scaling")
        times = self.obs_times
        if not times or times[0] <= 0 or any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError("obs_times must be positive and strictly increasing")
        for t, k in zip(times, self.obs_steps):
            if abs(k * self.dt - t) > 1e-9 * max(1.0, t):
                raise ConfigError(f"observation time {t} is not a multiple of dt={self.dt}")
        if self.initial_z is not None:
            lo, hi = self.initial_z
            if not 0 <= lo <= hi <= self.lz:
                raise ConfigError("initial_z must be a sub-interval of [0, lz]")
        return self

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["obs_times"] = list(self.obs_times)
        if self.initial_z is not None:
            d["initial_z"] = list(self.initial_z)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> SimConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        return cls(**d)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()
