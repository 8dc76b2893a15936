"""Assembly and persistence of the end-of-run report files."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..analysis.groups import PathologyResult, TestReport
from ..sim.simulator import OBSERVABLES
from .predictive import QUANTILE_CONVENTION

REPORT_FILES = (
    "map_table.csv",
    "test_report.csv",
    "pathology.json",
    "energy_scores.csv",
    "predictive_bands.csv",
    "boxplot_stats.json",
)


def _r(v) -> str:
    return repr(float(v))


@dataclass
class PipelineReport:
    """All report content; everything here is a deterministic function of the run inputs."""

    ids: list
    groups: list
    parameters: tuple
    map_table: np.ndarray
    tests: TestReport | None = None
    pathology: PathologyResult | None = None
    energy: dict = field(default_factory=dict)
    bands: dict = field(default_factory=dict)
    boxplots: dict = field(default_factory=dict)
    rand_indices: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    failed: list = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.failed and self.tests is not None and self.pathology is not None

    def check_ids(self) -> None:
        known = set(self.ids)
        for name, ids in (("energy", self.energy), ("bands", self.bands)):
            extra = set(ids) - known
            if extra:
                raise ValueError(f"{name} section refers to unknown subjects {sorted(extra)}")
        if self.pathology is not None and self.pathology.ids:
            extra = set(self.pathology.ids) - known
            if extra:
                raise ValueError(f"pathology section refers to unknown subjects {sorted(extra)}")

    # renderers -----------------------------------------------------------

    def map_table_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "group", *self.parameters])
        for i, (sid, g) in enumerate(zip(self.ids, self.groups)):
            w.writerow([sid, g, *(_r(v) for v in self.map_table[i])])
        return buf.getvalue()

    def energy_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "group", *OBSERVABLES])
        for sid, g in zip(self.ids, self.groups):
            if sid in self.energy:
                w.writerow([sid, g, *(_r(v) for v in self.energy[sid])])
        return buf.getvalue()

    def bands_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "group", "t", "observable", "observed", "lower", "median", "upper"])
        for sid, g in zip(self.ids, self.groups):
            if sid not in self.bands:
                continue
            bands, x_obs = self.bands[sid]
            obs = np.asarray(x_obs, dtype=float).reshape(bands.median.shape)
            for i, t in enumerate(bands.times):
                for k, name in enumerate(OBSERVABLES):
                    w.writerow([sid, g, _r(t), name, _r(obs[i, k]), _r(bands.lower[i, k]),
                                _r(bands.median[i, k]), _r(bands.upper[i, k])])
        return buf.getvalue()

    def pathology_json(self) -> str:
        d = self.pathology.to_dict() if self.pathology is not None else {"available": False}
        return json.dumps(d, indent=1, sort_keys=True) + "\n"

    def boxplot_json(self) -> str:
        return json.dumps({"quantile_convention": QUANTILE_CONVENTION, "whisker_iqr": 1.5,
                           "parameters": self.boxplots}, indent=1, sort_keys=True) + "\n"

    def summary_json(self) -> str:
        return json.dumps({
            "complete": self.complete,
            "failed_subjects": self.failed,
            "files": list(REPORT_FILES),
            "quantile_convention": QUANTILE_CONVENTION,
            "rand_indices": self.rand_indices,
            "tests": self.tests.to_dict() if self.tests is not None else None,
            "provenance": self.provenance,
        }, indent=1, sort_keys=True, default=_default) + "\n"


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(type(obj).__name__)


def emit_report(report: PipelineReport, out_dir) -> list:
    """Write the six report files plus ``report.json``; returns the written paths."""
    report.check_ids()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    empty_tests = "parameter\n"
    contents = {
        "map_table.csv": report.map_table_csv(),
        "test_report.csv": report.tests.to_csv() if report.tests is not None else empty_tests,
        "pathology.json": report.pathology_json(),
        "energy_scores.csv": report.energy_csv(),
        "predictive_bands.csv": report.bands_csv(),
        "boxplot_stats.json": report.boxplot_json(),
        "report.json": report.summary_json(),
    }
    paths = []
    for name, text in contents.items():
        p = out / name
        p.write_text(text)
        paths.append(p)
    return paths
