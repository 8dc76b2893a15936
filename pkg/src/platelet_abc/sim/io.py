"""Trace files: a CSV table plus a JSON sidecar with run metadata."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .model import ModelParams, SimConfig
from .simulator import DepositionTrace

TRACE_HEADER = ("t", "n_agg_clust_per_mm2", "s_agg_clust_um2", "n_platelet_per_ul")


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_suffix(".json")


def write_trace(path, trace: DepositionTrace, params: ModelParams | None = None,
                config: SimConfig | None = None, seed: int | None = None) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for row in trace.table():
            writer.writerow([repr(float(v)) for v in row])
    meta = {
        "n_platelet_0": trace.n_platelet_0,
        "n_act_platelet_0": trace.n_act_platelet_0,
        "clamp_counts": trace.clamp_counts,
    }
    if params is not None:
        meta["params"] = params.as_dict()
    if config is not None:
        meta["config"] = config.to_dict()
        meta["config_hash"] = config.config_hash()
    if seed is not None:
        meta["seed"] = int(seed)
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_trace(path) -> DepositionTrace:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != TRACE_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = np.array([[float(v) for v in row] for row in reader if row])
    if rows.shape[0] < 2 or rows[0, 0] != 0.0:
        raise ValueError(f"{path}: expected a t=0 row followed by observation rows")
    n_act0 = np.nan
    side = sidecar_path(path)
    clamps = {}
    if side.exists():
        meta = json.loads(side.read_text())
        n_act0 = meta.get("n_act_platelet_0", np.nan)
        clamps = meta.get("clamp_counts", {})
    return DepositionTrace(rows[1:, 0], rows[1:, 1:], float(rows[0, 3]), float(n_act0), clamps)
