"""Patient records, the cohort file format and the synthetic cohort generator."""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import rng as crng
from ..abc.prior import Prior
from ..sim.model import PARAM_NAMES, ModelParams, SimConfig
from ..sim.simulator import DepositionTrace, simulate

GROUPS = ("healthy", "dialysis", "copd")
OBS_TIMES = (20.0, 120.0, 300.0)
COHORT_COLUMNS = (
    "id", "group", "n_platelet_0", "n_act_platelet_0",
    "n_agg_20", "s_agg_20", "n_plt_20",
    "n_agg_120", "s_agg_120", "n_plt_120",
    "n_agg_300", "s_agg_300", "n_plt_300",
)


class CohortError(ValueError):
    pass


@dataclass
class PatientRecord:
    id: str
    group: str
    n_platelet_0: float
    n_act_platelet_0: float
    trace: DepositionTrace
    posterior: object = None
    map_estimate: object = None
    truth: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def x(self) -> np.ndarray:
        return self.trace.vector()

    def row(self) -> list:
        return [self.id, self.group, repr(float(self.n_platelet_0)), repr(float(self.n_act_platelet_0))] + [
            repr(float(v)) for v in self.x
        ]

    def content(self) -> dict:
        """Everything that defines the observation (used for content hashes)."""
        return {"id": self.id, "group": self.group, "n_platelet_0": float(self.n_platelet_0),
                "n_act_platelet_0": float(self.n_act_platelet_0), "x": [float(v) for v in self.x]}


def _column_names(obs_times) -> tuple:
    cols = ["id", "group", "n_platelet_0", "n_act_platelet_0"]
    for t in obs_times:
        tt = f"{t:g}"
        cols += [f"n_agg_{tt}", f"s_agg_{tt}", f"n_plt_{tt}"]
    return tuple(cols)


def load_cohort(path, labels=GROUPS, obs_times=OBS_TIMES) -> list:
    """Read and validate a cohort CSV.

    Hard errors (with line numbers) for missing columns, unparsable or negative
    numbers, unknown labels and duplicate ids. A platelet count that ends above
    its initial value only triggers a warning.
    """
    path = Path(path)
    expected = _column_names(obs_times)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CohortError(f"{path}: no records") from None
        header = [h.strip() for h in header]
        missing = [c for c in expected if c not in header]
        if missing:
            raise CohortError(f"{path}:1: missing column(s) {missing}")
        pos = {c: header.index(c) for c in expected}
        records, seen = [], set()
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(header):
                raise CohortError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            rid, group = row[pos["id"]].strip(), row[pos["group"]].strip()
            if not rid:
                raise CohortError(f"{path}:{lineno}: empty id")
            if rid in seen:
                raise CohortError(f"{path}:{lineno}: duplicate id {rid!r}")
            if labels is not None and group not in labels:
                raise CohortError(f"{path}:{lineno}: unknown group {group!r} (allowed: {', '.join(labels)})")
            nums = {}
            for c in expected[2:]:
                try:
                    v = float(row[pos[c]])
                except ValueError:
                    raise CohortError(f"{path}:{lineno}: column {c} is not a number: {row[pos[c]]!r}") from None
                if not np.isfinite(v) or v < 0:
                    raise CohortError(f"{path}:{lineno}: column {c} must be a non-negative number, got {v}")
                nums[c] = v
            values = np.array([nums[c] for c in expected[4:]]).reshape(len(obs_times), 3)
            if values[-1, 2] > nums["n_platelet_0"]:
                warnings.warn(f"{path}:{lineno}: subject {rid} ends with more platelets in suspension "
                              "than it started with", RuntimeWarning, stacklevel=2)
            trace = DepositionTrace(np.array(obs_times, dtype=float), values,
                                    nums["n_platelet_0"], nums["n_act_platelet_0"])
            records.append(PatientRecord(rid, group, nums["n_platelet_0"], nums["n_act_platelet_0"], trace))
            seen.add(rid)
    if not records:
        raise CohortError(f"{path}: no records")
    return records


def save_cohort(records, path, obs_times=OBS_TIMES) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_column_names(obs_times))
        for r in records:
            w.writerow(r.row())


# synthetic cohorts -----------------------------------------------------

@dataclass
class CohortSpec:
    """Recipe for a synthetic cohort.

    Every subject's parameters are its group centre times independent lognormal
    factors ``exp(jitter_sd * z)``; its trace is simulated with ``config``.
    """

    centers: dict
    config: SimConfig
    prior: Prior
    n_per_group: int = 16
    jitter_sd: float = 0.05
    seed: int = 0
    max_attempts: int = 100

    def __post_init__(self):
        if self.jitter_sd < 0:
            raise ValueError("jitter_sd must be non-negative")
        if self.n_per_group < 1:
            raise ValueError("n_per_group must be positive")
        self.centers = {g: np.asarray(c, dtype=float) for g, c in self.centers.items()}
        for g, c in self.centers.items():
            if c.size != self.prior.dim:
                raise ValueError(f"centre of group {g} has {c.size} values, prior has {self.prior.dim}")
            if not self.prior.contains(c):
                raise ValueError(f"centre of group {g} lies outside the prior box")

    def to_dict(self) -> dict:
        return {
            "centers": {g: c.tolist() for g, c in self.centers.items()},
            "config": self.config.to_dict(),
            "prior": self.prior.to_dict(),
            "n_per_group": self.n_per_group,
            "jitter_sd": self.jitter_sd,
            "seed": self.seed,
        }


def planted_centers(base, factors: dict) -> dict:
    """Group centres from a baseline and per-group multiplicative changes.

    ``factors`` maps group -> {parameter name: factor}; groups without changes
    map to an empty dict.
    """
    base = np.asarray(base, dtype=float)
    out = {}
    for g, changes in factors.items():
        c = base.copy()
        for name, f in changes.items():
            c[PARAM_NAMES.index(name)] *= f
        out[g] = c
    return out


def jittered_params(spec: CohortSpec, center, stream: int) -> np.ndarray:
    """Lognormal jitter around ``center``, re-drawn while outside the prior box."""
    d = center.size
    for attempt in range(spec.max_attempts):
        z = np.array([crng.normals(spec.seed, [stream], attempt, 2 * k)[0] for k in range(d)])
        theta = center * np.exp(spec.jitter_sd * z)
        if spec.prior.contains(theta):
            return theta
    raise CohortError(f"no jittered parameter vector inside the prior box after {spec.max_attempts} attempts")


def generate_synthetic_cohort(spec: CohortSpec) -> list:
    """Simulate ``n_per_group`` subjects per group; true parameters go to ``record.truth``."""
    records = []
    scale = spec.config.volume_ul * spec.config.particle_scale
    for gi, (group, center) in enumerate(spec.centers.items()):
        for j in range(spec.n_per_group):
            stream = gi * 100_000 + j
            theta = jittered_params(spec, center, stream)
            sim_seed = int(crng.derive_seeds(spec.seed, [stream], 0, 1 << 21)[0])
            trace = simulate(ModelParams.unchecked(theta), spec.config, sim_seed)
            rec = PatientRecord(
                id=f"{group}_{j + 1:02d}", group=group,
                n_platelet_0=spec.config.n_nap / scale, n_act_platelet_0=spec.config.n_ap / scale,
                trace=trace, truth=theta, extra={"seed": sim_seed},
            )
            records.append(rec)
    return records


def truth_table(records) -> dict:
    return {
        r.id: {"group": r.group, "theta": dict(zip(PARAM_NAMES, map(float, r.truth))),
               "seed": r.extra.get("seed")}
        for r in records if r.truth is not None
    }


def save_truth(records, path) -> None:
    Path(path).write_text(json.dumps(truth_table(records), indent=1, sort_keys=True) + "\n")


def attach_truth(records, path) -> None:
    table = json.loads(Path(path).read_text())
    for r in records:
        if r.id in table:
            r.truth = np.array([table[r.id]["theta"][n] for n in PARAM_NAMES])
