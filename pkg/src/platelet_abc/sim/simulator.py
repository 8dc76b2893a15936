"""Particle simulator of platelet transport and deposition."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .model import ConfigError, ModelParams, SimConfig

OBSERVABLES = ("n_agg_clust", "s_agg_clust", "n_platelet")


@dataclass
class SimState:
    """Mutable state of one simulation.

    Particles ``0 .. n_ap-1`` are activated platelets, the rest non-activated.
    ``status`` is 0 (bulk), 1 (trapped in the cell-free layer) or 2 (deposited);
    ``cell`` holds the flat substrate index under trapped and deposited platelets.
    ``height`` counts platelets stacked on each substrate cell (0 = empty).
    Albumin coverage is uniform over the substrate and kept as a fraction of the
    per-cell capacity.
    """

    pos: np.ndarray
    is_ap: np.ndarray
    status: np.ndarray
    cell: np.ndarray
    height: np.ndarray
    albumin: np.ndarray
    clamps: np.ndarray
    keys: np.ndarray
    seed: int
    dt: float
    rho_max: float
    step: int = 0
    n_initial: int = field(init=False)

    def __post_init__(self):
        self.n_initial = int(self.pos.shape[0])

    @property
    def t(self) -> float:
        return self.step * self.dt

    @property
    def ap_positions(self) -> np.ndarray:
        return self.pos[self.is_ap & (self.status == K.BULK)]

    @property
    def nap_positions(self) -> np.ndarray:
        return self.pos[~self.is_ap & (self.status == K.BULK)]

    @property
    def rho_al(self) -> np.ndarray:
        """Deposited albumin per cell [1/um^2]."""
        return np.full(self.height.shape, self.albumin[0] * self.rho_max)

    @property
    def occupied(self) -> np.ndarray:
        return self.height > 0

    def counts(self) -> dict:
        bulk, trapped, deposited = K.count_status(self.status)
        return {"bulk": int(bulk), "trapped": int(trapped), "deposited": int(deposited)}

    def cfl_trapped(self) -> dict:
        """Map substrate cell (i, j) to the ids of platelets waiting above it."""
        ny = self.height.shape[1]
        out: dict = {}
        for i in np.flatnonzero(self.status == K.TRAPPED):
            c = int(self.cell[i])
            out.setdefault(divmod(c, ny), []).append(int(i))
        return out

    @property
    def clamp_counts(self) -> dict:
        return dict(zip(("P", "Q", "R", "T"), (int(c) for c in self.clamps)))

    def copy(self) -> SimState:
        new = SimState(
            self.pos.copy(), self.is_ap.copy(), self.status.copy(), self.cell.copy(),
            self.height.copy(), self.albumin.copy(), self.clamps.copy(),
            self.keys, self.seed, self.dt, self.rho_max, self.step,
        )
        new.n_initial = self.n_initial
        return new


@dataclass
class DepositionTrace:
    """Observed quantities at each observation time.

    ``values`` has one row per time in ``times`` and columns
    ``(n_agg_clust [1/mm^2], s_agg_clust [um^2], n_platelet [1/ul])``.
    """

    times: np.ndarray
    values: np.ndarray
    n_platelet_0: float
    n_act_platelet_0: float
    clamp_counts: dict = field(default_factory=dict)

    def vector(self) -> np.ndarray:
        """Flattened observation vector, time-major: (n_agg, s_agg, n_plt) per time."""
        return np.asarray(self.values, dtype=float).ravel()

    @classmethod
    def from_vector(cls, vec, times=(20.0, 120.0, 300.0), n_platelet_0=np.nan, n_act_platelet_0=np.nan):
        vec = np.asarray(vec, dtype=float)
        return cls(np.asarray(times, dtype=float), vec.reshape(len(times), 3),
                   float(n_platelet_0), float(n_act_platelet_0))

    def table(self) -> np.ndarray:
        """Rows ``(t, n_agg, s_agg, n_plt)`` including the initial row at t = 0."""
        first = [0.0, 0.0, 0.0, self.n_platelet_0]
        rest = np.column_stack([self.times, self.values])
        return np.vstack([first, rest])


def _check_params(params: ModelParams):
    arr = params.as_array()
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError("model parameters must be finite and non-negative")
    return arr


def init_simulation(config: SimConfig, params: ModelParams, seed: int) -> SimState:
    """Place AP and NAP uniformly in the domain with an empty substrate."""
    config.validate()
    _check_params(params)
    n_ap, n_nap = config.n_ap, config.n_nap
    n = n_ap + n_nap
    if n == 0:
        raise ConfigError("no particles after scaling")
    z_lo, z_hi = config.initial_z if config.initial_z is not None else (0.0, config.lz)
    keys = K.particle_keys(np.uint64(seed), n)
    pos = np.empty((n, 3))
    K.place_particles(pos, keys, config.lx, config.ly, z_lo, z_hi)
    is_ap = np.zeros(n, dtype=np.bool_)
    is_ap[:n_ap] = True
    return SimState(
        pos=pos,
        is_ap=is_ap,
        status=np.zeros(n, dtype=np.int8),
        cell=np.full(n, -1, dtype=np.int64),
        height=np.zeros((config.nx, config.ny), dtype=np.int32),
        albumin=np.zeros(1),
        clamps=np.zeros(4, dtype=np.int64),
        keys=keys,
        seed=int(seed),
        dt=config.dt,
        rho_max=config.rho_max,
    )


def advance(state: SimState, params: ModelParams, config: SimConfig, n_steps: int,
            count_log: np.ndarray | None = None) -> SimState:
    """Run ``n_steps`` full steps (transport, then deposition) in place."""
    p = _check_params(params)
    log = np.zeros((0, 3), dtype=np.int64) if count_log is None else count_log
    K.run_steps(
        state.pos, state.is_ap, state.status, state.cell, state.height, state.albumin,
        state.clamps, state.keys, state.step, int(n_steps),
        p[5], p[6], config.shear_rate, config.dt, config.lx, config.ly, config.lz,
        p[0], p[1], p[2], p[3], p[4], log,
    )
    state.step += int(n_steps)
    return state


def advance_one_step(state: SimState, params: ModelParams, config: SimConfig) -> SimState:
    """Move every bulk platelet once, trap those crossing z = 0, then try depositions.

    The state is updated in place and returned.
    """
    return advance(state, params, config, 1)


def attempt_depositions(state: SimState, params: ModelParams, config: SimConfig) -> int:
    """Deposition phase of the current step only; returns the number of new deposits.

    Does not advance time. Draws use the current step's counter, so this is meant
    for inspecting the deposition rules in isolation.
    """
    p = _check_params(params)
    return int(K.deposit(
        state.is_ap, state.status, state.cell, state.height, state.albumin, state.clamps,
        state.keys, state.step, p[0], p[1], p[2], p[3], p[4], config.dt,
    ))


def label_clusters(occupied) -> list:
    """4-connected clusters of occupied substrate cells, periodic in x and y.

    Returns a list of ``(k, 2)`` integer arrays of cell indices, one per cluster.
    """
    occupied = np.asarray(occupied, dtype=np.bool_)
    if occupied.ndim != 2:
        raise ValueError("occupancy grid must be 2-D")
    labels, sizes = K.label_grid(occupied)
    return [np.argwhere(labels == k + 1) for k in range(sizes.size)]


def cluster_sizes(occupied) -> np.ndarray:
    _, sizes = K.label_grid(np.asarray(occupied, dtype=np.bool_))
    return sizes


def measure(state: SimState, config: SimConfig) -> np.ndarray:
    """``(n_agg_clust [1/mm^2], s_agg_clust [um^2], n_platelet [1/ul])`` for the current state.

    ``n_platelet`` counts non-activated platelets not yet deposited (bulk plus
    those waiting in the cell-free layer).
    """
    sizes = cluster_sizes(state.occupied)
    n_clusters = sizes.size
    n_agg = n_clusters / config.area_mm2
    s_agg = sizes.mean() * config.cell_area_um2 if n_clusters else 0.0
    nap_left = int(np.count_nonzero(~state.is_ap & (state.status != K.DEPOSITED)))
    n_plt = nap_left / (config.volume_ul * config.particle_scale)
    return np.array([n_agg, s_agg, n_plt])


def simulate(params: ModelParams, config: SimConfig, seed: int, count_log: bool = False):
    """Deposition trace at ``config.obs_times``; a pure function of its arguments.

    With ``count_log=True`` also returns an ``(n_steps, 3)`` array of
    (bulk, trapped, deposited) counts after every step.
    """
    state = init_simulation(config, params, seed)
    scale = config.volume_ul * config.particle_scale
    n_plt0 = config.n_nap / scale
    n_act0 = config.n_ap / scale
    rows = []
    logs = []
    for target in config.obs_steps:
        n = target - state.step
        log = np.zeros((n, 3), dtype=np.int64) if count_log else None
        advance(state, params, config, n, log)
        if count_log:
            logs.append(log)
        rows.append(measure(state, config))
    trace = DepositionTrace(np.array(config.obs_times), np.array(rows), n_plt0, n_act0,
                            state.clamp_counts)
    if count_log:
        return trace, np.vstack(logs)
    return trace


class DepositionSimulator:
    """Picklable ``(theta, seed) -> observation vector`` callable for the ABC engine."""

    def __init__(self, config: SimConfig):
        self.config = config.validate()

    def __call__(self, theta, seed: int) -> np.ndarray:
        return simulate(ModelParams.unchecked(theta), self.config, int(seed)).vector()

    def __repr__(self):
        return f"DepositionSimulator(config_hash={self.config.config_hash()[:12]})"
