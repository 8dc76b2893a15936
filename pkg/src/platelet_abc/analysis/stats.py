"""Rank tests, multiplicity correction, scoring rules and descriptive statistics."""

from __future__ import annotations

import numpy as np
from scipy.special import gammaincc


class DegenerateTiesError(ValueError):
    pass


def average_ranks(values) -> np.ndarray:
    """1-based ranks; tied values share the mean of their positions."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size)
    sv = v[order]
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def chi2_sf(x: float, df: int) -> float:
    """Upper tail of the chi-square distribution via the regularized incomplete gamma."""
    if x <= 0:
        return 1.0
    return float(gammaincc(0.5 * df, 0.5 * x))


def kruskal_wallis(groups) -> tuple[float, float]:
    """Tie-corrected H statistic and its chi-square p-value (``groups - 1`` dof)."""
    groups = [np.asarray(g, dtype=float).ravel() for g in groups]
    if len(groups) < 2:
        raise ValueError("need at least two groups")
    if any(g.size == 0 for g in groups):
        raise ValueError("empty group")
    allv = np.concatenate(groups)
    n = allv.size
    if n < 3:
        raise ValueError("need at least three observations")
    if not np.all(np.isfinite(allv)):
        raise ValueError("non-finite observation")
    ranks = average_ranks(allv)
    h = 0.0
    start = 0
    for g in groups:
        r = ranks[start:start + g.size]
        h += r.sum() ** 2 / g.size
        start += g.size
    h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)
    _, counts = np.unique(allv, return_counts=True)
    correction = 1.0 - (counts**3 - counts).sum() / (n**3 - n)
    if correction <= 0:
        raise DegenerateTiesError("all observations are identical")
    h = max(h / correction, 0.0)
    return h, chi2_sf(h, len(groups) - 1)


def bh_adjust(pvalues) -> np.ndarray:
    """Benjamini-Hochberg step-up adjusted p-values, in input order."""
    p = np.asarray(pvalues, dtype=float)
    if p.size == 0:
        return p.copy()
    if np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
        raise ValueError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    scaled = p[order] * m / np.arange(1, m + 1)
    adj = np.minimum.accumulate(scaled[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(adj, 1.0)
    return out


def energy_score(predictions, x_obs, beta: float = 1.0, normalized: bool = False) -> float:
    """``2 sum_i |x_i - y|^b - sum_{i,j} |x_i - x_j|^b`` over all ordered pairs.

    With ``normalized`` the sums are divided by ``n`` and ``n^2``. Predictions are
    rows (or scalars); ``x_obs`` has matching trailing shape.
    """
    if not 0 < beta < 2:
        raise ValueError("beta must lie in (0, 2)")
    X = np.asarray(predictions, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(x_obs, dtype=float).reshape(1, -1)
    if X.shape[0] == 0:
        raise ValueError("no predictions")
    if X.shape[1] != y.shape[1]:
        raise ValueError("prediction and observation dimensions differ")
    n = X.shape[0]
    first = (np.sqrt(((X - y) ** 2).sum(axis=1)) ** beta).sum()
    second = (np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=-1)) ** beta).sum()
    if normalized:
        return float(2.0 * first / n - second / n**2)
    return float(2.0 * first - second)


def energy_scores_by_observable(predictions, x_obs, n_times: int = 3, beta: float = 1.0,
                                normalized: bool = False) -> np.ndarray:
    """One score per observable, comparing its time series across predictions.

    Inputs are time-major flattened traces (``n_times`` rows of observables).
    """
    X = np.asarray(predictions, dtype=float)
    X = X.reshape(X.shape[0], n_times, -1)
    y = np.asarray(x_obs, dtype=float).reshape(n_times, -1)
    return np.array([energy_score(X[:, :, k], y[:, k], beta, normalized) for k in range(y.shape[1])])


def quantile(values, q):
    """Linear interpolation between order statistics at position ``q (n - 1)``."""
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        raise ValueError("no values")
    q = np.asarray(q, dtype=float)
    if np.any((q < 0) | (q > 1)):
        raise ValueError("quantile levels must lie in [0, 1]")
    pos = q * (v.size - 1)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, v.size - 1)
    frac = pos - lo
    out = v[lo] + frac * (v[hi] - v[lo])
    # keep exact order statistics where the position is integral
    out = np.where(frac == 0, v[lo], out)
    return float(out) if out.ndim == 0 else out


def boxplot_stats(values, whisker: float = 1.5) -> dict:
    """Quartiles, whisker ends (most extreme data within ``whisker`` IQRs) and outliers."""
    v = np.asarray(values, dtype=float).ravel()
    q1, med, q3 = quantile(v, [0.25, 0.5, 0.75])
    iqr = q3 - q1
    lo_lim, hi_lim = q1 - whisker * iqr, q3 + whisker * iqr
    inside = v[(v >= lo_lim) & (v <= hi_lim)]
    return {
        "n": int(v.size),
        "q1": float(q1),
        "median": float(med),
        "q3": float(q3),
        "whisker_low": float(inside.min()),
        "whisker_high": float(inside.max()),
        "outliers": sorted(float(x) for x in v[(v < lo_lim) | (v > hi_lim)]),
    }
