"""Group comparisons on per-subject MAP estimates and the median-distance pathology test."""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field

import numpy as np

from .stats import DegenerateTiesError, bh_adjust, boxplot_stats, kruskal_wallis

HEALTHY = "healthy"
DISEASE = "disease"
ALPHA = 0.05


def _comparison_name(groups: tuple) -> str:
    return "omnibus" if len(groups) > 2 else f"{groups[0]}_vs_{groups[1]}"


@dataclass
class TestReport:
    """H statistics and p-values per (comparison, parameter).

    Comparisons are the omnibus test over all groups followed by every pair in
    group order. Adjustment is Benjamini-Hochberg within each comparison, across
    parameters.
    """

    parameters: tuple
    comparisons: tuple
    H: np.ndarray
    p: np.ndarray
    p_adj: np.ndarray
    alpha: float = ALPHA

    @property
    def significant(self) -> np.ndarray:
        return self.p_adj < self.alpha

    @property
    def significant_raw(self) -> np.ndarray:
        return self.p < self.alpha

    def column(self, comparison) -> int:
        """Index of a comparison given by name (``omnibus``, ``a_vs_b``) or by its group tuple."""
        if not isinstance(comparison, str):
            comparison = _comparison_name(tuple(comparison))
        return [_comparison_name(c) for c in self.comparisons].index(comparison)

    def flagged(self, comparison="omnibus") -> list:
        j = self.column(comparison)
        return [name for name, s in zip(self.parameters, self.significant[:, j]) if s]

    def to_dict(self) -> dict:
        out = {"alpha": self.alpha, "adjustment": "benjamini-hochberg", "comparisons": {}}
        for j, comp in enumerate(self.comparisons):
            rows = {}
            for i, name in enumerate(self.parameters):
                rows[name] = {
                    "H": float(self.H[i, j]), "p": float(self.p[i, j]), "p_adj": float(self.p_adj[i, j]),
                    "significant": bool(self.significant[i, j]),
                }
            out["comparisons"][_comparison_name(comp)] = {"groups": list(comp), "parameters": rows}
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["parameter"]
        for comp in self.comparisons:
            c = _comparison_name(comp)
            header += [f"{c}_H", f"{c}_p", f"{c}_p_adj", f"{c}_significant"]
        w.writerow(header)
        for i, name in enumerate(self.parameters):
            row = [name]
            for j in range(len(self.comparisons)):
                row += [repr(float(self.H[i, j])), repr(float(self.p[i, j])), repr(float(self.p_adj[i, j])),
                        int(self.significant[i, j])]
            w.writerow(row)
        return buf.getvalue()


def group_tests(values, labels, parameters, group_order=None, alpha: float = ALPHA) -> TestReport:
    """Kruskal-Wallis tests of every parameter column across groups.

    A column whose values are all identical within a comparison gets H = 0, p = 1.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    labels = np.asarray(labels)
    order = tuple(group_order) if group_order is not None else tuple(dict.fromkeys(labels.tolist()))
    comparisons = []
    if len(order) > 2:
        comparisons.append(order)
    comparisons += list(itertools.combinations(order, 2))
    n_par, n_cmp = values.shape[1], len(comparisons)
    H = np.zeros((n_par, n_cmp))
    p = np.ones((n_par, n_cmp))
    for j, comp in enumerate(comparisons):
        for i in range(n_par):
            try:
                H[i, j], p[i, j] = kruskal_wallis([values[labels == g, i] for g in comp])
            except DegenerateTiesError:
                H[i, j], p[i, j] = 0.0, 1.0
    p_adj = np.column_stack([bh_adjust(p[:, j]) for j in range(n_cmp)])
    return TestReport(tuple(parameters), tuple(comparisons), H, p, p_adj, alpha)


def boxplot_table(values, labels, parameters, group_order=None) -> dict:
    """Boxplot summaries per parameter and group."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    labels = np.asarray(labels)
    order = tuple(group_order) if group_order is not None else tuple(dict.fromkeys(labels.tolist()))
    return {name: {g: boxplot_stats(values[labels == g, i]) for g in order if np.any(labels == g)}
            for i, name in enumerate(parameters)}


def classify_pathology(value: float, median_healthy: float, median_disease: float) -> str:
    """Nearest group median; an exact tie counts as healthy."""
    if not (np.isfinite(median_healthy) and np.isfinite(median_disease)):
        raise ValueError("group medians must be finite")
    return DISEASE if abs(value - median_disease) < abs(value - median_healthy) else HEALTHY


@dataclass
class PathologyResult:
    predicted: list
    truth: list
    tp: int
    fn: int
    fp: int
    tn: int
    parameter: str = ""
    median_healthy: float = float("nan")
    median_disease: float = float("nan")
    groups: tuple = (HEALTHY, DISEASE)
    ids: list = field(default_factory=list)

    @property
    def sensitivity(self) -> float:
        pos = self.tp + self.fn
        return self.tp / pos if pos else float("nan")

    @property
    def specificity(self) -> float:
        neg = self.tn + self.fp
        return self.tn / neg if neg else float("nan")

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    def to_dict(self) -> dict:
        return {
            "parameter": self.parameter,
            "groups": list(self.groups),
            "median_healthy": self.median_healthy,
            "median_disease": self.median_disease,
            "confusion": {"tp": self.tp, "fn": self.fn, "fp": self.fp, "tn": self.tn},
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "subjects": [
                {"id": i, "true": t, "predicted": p}
                for i, t, p in zip(self.ids or range(len(self.truth)), self.truth, self.predicted)
            ],
        }


def confusion_metrics(predicted, truth) -> PathologyResult:
    """Confusion counts with ``disease`` as the positive class."""
    predicted, truth = list(predicted), list(truth)
    if len(predicted) != len(truth):
        raise ValueError("label lists differ in length")
    allowed = {HEALTHY, DISEASE}
    if not set(predicted) | set(truth) <= allowed:
        raise ValueError(f"labels must be in {sorted(allowed)}")
    pairs = list(zip(predicted, truth))
    tp = sum(p == DISEASE and t == DISEASE for p, t in pairs)
    fn = sum(p == HEALTHY and t == DISEASE for p, t in pairs)
    fp = sum(p == DISEASE and t == HEALTHY for p, t in pairs)
    tn = sum(p == HEALTHY and t == HEALTHY for p, t in pairs)
    return PathologyResult(predicted, truth, tp, fn, fp, tn)


def pathology_test(values, labels, healthy_group: str, disease_group: str, parameter: str = "",
                   ids=None) -> PathologyResult:
    """Classify the subjects of two groups by the nearest group median of one parameter.

    Medians come from the same subjects that are classified.
    """
    values = np.asarray(values, dtype=float).ravel()
    labels = np.asarray(labels)
    keep = (labels == healthy_group) | (labels == disease_group)
    v, lab = values[keep], labels[keep]
    mh = float(np.median(v[lab == healthy_group]))
    md = float(np.median(v[lab == disease_group]))
    pred = [classify_pathology(x, mh, md) for x in v]
    truth = [DISEASE if g == disease_group else HEALTHY for g in lab]
    res = confusion_metrics(pred, truth)
    res.parameter = parameter
    res.median_healthy, res.median_disease = mh, md
    res.groups = (healthy_group, disease_group)
    res.ids = np.asarray(ids)[keep].tolist() if ids is not None else []
    return res
