"""Plain-text run configuration (INI-style ``key = value`` sections)."""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..abc.prior import Prior
from ..abc.samples import AbcConfig
from ..sim.model import PARAM_NAMES, SimConfig
from .cohort import GROUPS, planted_centers

SUMMARY_METHODS = ("sasl", "tlsl", "dssl", "scaled", "identity")

# Desk-scale study defaults (geometry in SimConfig.desk). The prior spans a factor 3
# around the healthy centre, widened by the planted factor where one applies.
DESK_BASE = (0.05, 0.03, 0.01, 0.02, 1.5, 2e-5, 2e-5)
DESK_FACTORS = {"healthy": {}, "dialysis": {"a_t": 3.0}, "copd": {"p_ag": 4.0, "v_z_nap": 3.0}}
DESK_PRIOR = Prior(
    lower=(0.015, 0.0025, 0.003, 0.006, 0.15, 6e-6, 2e-6),
    upper=(0.15, 0.36, 0.03, 0.06, 13.5, 6e-5, 1.8e-4),
    names=PARAM_NAMES,
    log_scale=(False,) * 5 + (True, True),  # only the transport speeds span decades
)


def desk_sim_config(**overrides) -> SimConfig:
    return SimConfig.desk(**overrides)


def _floats(text: str) -> list:
    return [float(v) for v in text.replace(",", " ").split()]


def _parse_factors(text: str) -> dict:
    out = {}
    for item in text.replace(",", " ").split():
        name, value = item.split(":")
        if name not in PARAM_NAMES:
            raise ValueError(f"unknown parameter {name!r} in factor list")
        out[name] = float(value)
    return out


@dataclass
class RunConfig:
    """Settings of one end-to-end run; every field is echoed into the report."""

    seed: int = 0
    workers: int = 1
    cohort_path: str | None = None
    groups: tuple = GROUPS
    n_per_group: int = 6
    jitter_sd: float = 0.05
    centers: dict = field(default_factory=lambda: planted_centers(DESK_BASE, DESK_FACTORS))
    sim: SimConfig = field(default_factory=desk_sim_config)
    abc: AbcConfig = field(default_factory=lambda: AbcConfig(n_samples=128, n_iterations=10))
    prior: Prior = DESK_PRIOR
    summary_method: str = "sasl"
    summary: dict = field(default_factory=lambda: {"n_pilot": 2000, "epochs": 200, "lr": 1e-3,
                                                   "batch_size": 16, "k": 3, "step": 1e-3})
    bandwidth: float = 0.45
    n_predictive: int = 100
    level: float = 0.95
    pathology_parameter: str | None = None
    healthy_group: str = "healthy"
    disease_group: str = "copd"

    def __post_init__(self):
        if self.summary_method not in SUMMARY_METHODS:
            raise ValueError(f"summary method must be one of {SUMMARY_METHODS}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        self.centers = {g: np.asarray(c, dtype=float) for g, c in self.centers.items()}
        self.groups = tuple(self.groups)

    # INI round trip ----------------------------------------------------

    def to_ini(self, execution: bool = True) -> str:
        """INI text; ``execution=False`` leaves out settings that cannot change results (workers)."""
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp["run"] = {"seed": str(self.seed), "cohort": self.cohort_path or ""}
        if execution:
            cp["run"]["workers"] = str(self.workers)
        cohort = {"groups": ", ".join(self.groups), "n_per_group": str(self.n_per_group),
                  "jitter_sd": repr(self.jitter_sd)}
        for g, c in self.centers.items():
            cohort[f"center.{g}"] = ", ".join(repr(float(v)) for v in c)
        cp["cohort"] = cohort
        sim = {}
        for k, v in self.sim.to_dict().items():
            if v is None:
                continue
            sim[k] = ", ".join(repr(float(x)) for x in v) if isinstance(v, (list, tuple)) else repr(v)
        cp["sim"] = sim
        cp["abc"] = {k: ("" if v is None else str(v)) for k, v in self.abc.to_dict().items() if k != "seed"}
        cp["prior"] = {
            "names": ", ".join(self.prior.names),
            "lower": ", ".join(repr(v) for v in self.prior.lower),
            "upper": ", ".join(repr(v) for v in self.prior.upper),
            "log_scale": ", ".join(n for n, m in zip(self.prior.names, self.prior.log_scale) if m),
        }
        cp["summary"] = {"method": self.summary_method, **{k: repr(v) for k, v in self.summary.items()}}
        cp["analysis"] = {
            "bandwidth": repr(self.bandwidth), "n_predictive": str(self.n_predictive), "level": repr(self.level),
            "pathology_parameter": self.pathology_parameter or "", "healthy_group": self.healthy_group,
            "disease_group": self.disease_group,
        }
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def save(self, path) -> None:
        Path(path).write_text(self.to_ini())

    @classmethod
    def from_ini(cls, text: str) -> RunConfig:
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
        cp.optionxform = str
        cp.read_string(text)
        known = {"run", "cohort", "sim", "abc", "prior", "summary", "analysis"}
        unknown = set(cp.sections()) - known
        if unknown:
            raise ValueError(f"unknown section(s) {sorted(unknown)}")
        kw: dict = {}
        if cp.has_section("run"):
            r = cp["run"]
            kw["seed"] = r.getint("seed", 0)
            kw["workers"] = r.getint("workers", 1)
            kw["cohort_path"] = r.get("cohort", "").strip() or None
        if cp.has_section("cohort"):
            c = cp["cohort"]
            groups = tuple(g.strip() for g in c.get("groups", ", ".join(GROUPS)).split(",") if g.strip())
            kw["groups"] = groups
            kw["n_per_group"] = c.getint("n_per_group", 6)
            kw["jitter_sd"] = c.getfloat("jitter_sd", 0.05)
            base = _floats(c["base"]) if "base" in c else list(DESK_BASE)
            factors = {g: _parse_factors(c.get(f"factor.{g}", "")) for g in groups}
            centers = planted_centers(base, factors)
            for g in groups:
                if f"center.{g}" in c:
                    centers[g] = np.array(_floats(c[f"center.{g}"]))
            kw["centers"] = centers
        if cp.has_section("sim"):
            s = dict(cp["sim"])
            preset = s.pop("preset", "desk")
            fields = {f.name: f for f in dataclasses.fields(SimConfig)}
            vals = {}
            for k, v in s.items():
                if k not in fields:
                    raise ValueError(f"unknown [sim] key {k!r}")
                if k in ("nx", "ny"):
                    vals[k] = int(v)
                elif k in ("obs_times", "initial_z"):
                    vals[k] = tuple(_floats(v))
                else:
                    vals[k] = float(v)
            kw["sim"] = SimConfig.desk(**vals) if preset == "desk" else SimConfig(**vals)
        if cp.has_section("abc"):
            a = cp["abc"]
            d = {}
            for f in dataclasses.fields(AbcConfig):
                if f.name not in a or f.name == "seed":
                    continue
                raw = a[f.name].strip()
                if f.name in ("epsilon0", "budget") and raw in ("", "None"):
                    d[f.name] = None
                elif f.name == "kernel":
                    d[f.name] = raw
                elif f.name in ("n_samples", "n_iterations", "max_redraws", "budget", "batch_size"):
                    d[f.name] = int(raw)
                else:
                    d[f.name] = float(raw)
            kw["abc"] = AbcConfig(**d)
        if cp.has_section("prior"):
            p = cp["prior"]
            names = tuple(n.strip() for n in p.get("names", ", ".join(PARAM_NAMES)).split(","))
            logs = {n.strip() for n in p.get("log_scale", "").split(",") if n.strip()}
            kw["prior"] = Prior(tuple(_floats(p["lower"])), tuple(_floats(p["upper"])), names,
                                tuple(n in logs for n in names))
        if cp.has_section("summary"):
            s = dict(cp["summary"])
            kw["summary_method"] = s.pop("method", "sasl")
            summary = RunConfig().summary
            for k, v in s.items():
                summary[k] = int(v) if v.strip().lstrip("-").isdigit() else float(v)
            kw["summary"] = summary
        if cp.has_section("analysis"):
            a = cp["analysis"]
            kw["bandwidth"] = a.getfloat("bandwidth", 0.45)
            kw["n_predictive"] = a.getint("n_predictive", 100)
            kw["level"] = a.getfloat("level", 0.95)
            kw["pathology_parameter"] = a.get("pathology_parameter", "").strip() or None
            kw["healthy_group"] = a.get("healthy_group", "healthy")
            kw["disease_group"] = a.get("disease_group", "copd")
        return cls(**kw)

    @classmethod
    def load(cls, path) -> RunConfig:
        return cls.from_ini(Path(path).read_text())

    def replace(self, **changes) -> RunConfig:
        return dataclasses.replace(self, **changes)
