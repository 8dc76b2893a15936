"""Spread of the MAP estimator: repeated inference on traces simulated from one parameter vector."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .. import rng as crng
from ..abc.engine import AbcConfig
from ..abc.prior import Prior
from ..sim.model import ModelParams, SimConfig
from ..sim.simulator import simulate
from ..summaries.transform import SummaryTransform
from .cohort import PatientRecord
from .inference import run_inference_all

VARIABILITY_STREAM = 9_000_017


@dataclass
class MapVariability:
    names: tuple
    theta: np.ndarray
    maps: np.ndarray  # (n_traces, d)
    seed: int

    @property
    def sd(self) -> np.ndarray:
        """Per-parameter sample sd of the MAP estimates (ddof 1)."""
        return self.maps.std(axis=0, ddof=1)

    @property
    def relative_sd(self) -> np.ndarray:
        return self.sd / np.abs(self.theta)

    def table(self) -> str:
        lines = [f"{'parameter':<10}{'true':>12}{'mean MAP':>12}{'σ̂':>12}"]
        for name, t, m, s in zip(self.names, self.theta, self.maps.mean(axis=0), self.sd):
            lines.append(f"{name:<10}{t:>12.4g}{m:>12.4g}{s:>12.4g}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {"names": list(self.names), "theta": self.theta.tolist(), "maps": self.maps.tolist(),
                "sigma_hat": self.sd.tolist(), "seed": self.seed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"


def replicate_records(theta, sim_config: SimConfig, n_traces: int, seed: int) -> list:
    """``n_traces`` independent traces of one parameter vector, wrapped as records."""
    theta = np.asarray(theta, dtype=float)
    scale = sim_config.volume_ul * sim_config.particle_scale
    seeds = crng.derive_seeds(seed, np.arange(n_traces), VARIABILITY_STREAM, 1)
    recs = []
    for i, s in enumerate(seeds):
        trace = simulate(ModelParams.unchecked(theta), sim_config, int(s))
        recs.append(PatientRecord(
            id=f"replicate_{i + 1:02d}", group="replicate", n_platelet_0=sim_config.n_nap / scale,
            n_act_platelet_0=sim_config.n_ap / scale, trace=trace, truth=theta, extra={"seed": int(s)},
        ))
    return recs


def map_variability(theta, prior: Prior, sim_config: SimConfig, abc_config: AbcConfig,
                    transform: SummaryTransform | None = None, n_traces: int = 10, seed: int = 0,
                    workers: int = 1, out_dir=None) -> MapVariability:
    """Simulate ``n_traces`` datasets from ``theta``, infer each, and collect the MAP estimates.

    Without a transform the summaries are divided by their sd across the replicate traces.
    """
    if n_traces < 2:
        raise ValueError("need at least two traces for a standard deviation")
    theta = np.asarray(theta, dtype=float)
    if not prior.contains(theta):
        raise ValueError("theta lies outside the prior box")
    records = replicate_records(theta, sim_config, n_traces, seed)
    if transform is None:
        sd = np.array([r.x for r in records]).std(axis=0)
        transform = SummaryTransform.linear(np.diag(1.0 / np.where(sd > 0, sd, 1.0)),
                                            provenance={"method": "scaled"})
    results = run_inference_all(records, transform, prior, abc_config, sim_config, out_dir=out_dir,
                                workers=workers, master_seed=seed)
    failed = [r for r in results if not r.ok]
    if failed:
        raise RuntimeError(f"inference failed for {', '.join(r.id for r in failed)}: {failed[0].error}")
    maps = np.array([r.map_estimate.theta for r in results])
    return MapVariability(tuple(prior.names), theta, maps, seed)
