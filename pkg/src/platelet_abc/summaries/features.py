"""Polynomial feature expansion with stored standardization constants."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def polynomial_expansion(x) -> np.ndarray:
    """``[x, x**2, x**3, x_i * x_j for i < j]`` with pairs in row-major upper-triangle order.

    Accepts one vector or a 2-D batch of row vectors; a 9-vector maps to 63 features.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    iu, ju = np.triu_indices(x.shape[1], k=1)
    out = np.hstack([x, x**2, x**3, x[:, iu] * x[:, ju]])
    return out[0] if single else out


def expanded_dim(d: int) -> int:
    return 3 * d + d * (d - 1) // 2


def _safe_sd(a: np.ndarray) -> np.ndarray:
    sd = a.std(axis=0)
    return np.where(sd > 0, sd, 1.0)


@dataclass
class FeatureExpansion:
    """Standardize, expand, standardize again.

    Raw inputs are standardized with ``in_mean``/``in_sd`` before the polynomial
    expansion, and the expanded features with ``out_mean``/``out_sd``, all fitted
    on training data. Constant features get a unit scale.
    """

    in_mean: np.ndarray
    in_sd: np.ndarray
    out_mean: np.ndarray
    out_sd: np.ndarray

    @classmethod
    def fit(cls, X) -> FeatureExpansion:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if not np.all(np.isfinite(X)):
            raise ValueError("training data contains non-finite values")
        in_mean, in_sd = X.mean(axis=0), _safe_sd(X)
        E = polynomial_expansion((X - in_mean) / in_sd)
        return cls(in_mean, in_sd, E.mean(axis=0), _safe_sd(E))

    @property
    def input_dim(self) -> int:
        return self.in_mean.size

    @property
    def output_dim(self) -> int:
        return self.out_mean.size

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.input_dim:
            raise ValueError(f"expected {self.input_dim} features, got {X.shape[-1]}")
        E = polynomial_expansion((X - self.in_mean) / self.in_sd)
        return (E - self.out_mean) / self.out_sd

    def to_dict(self) -> dict:
        return {
            "kind": "polynomial3",
            "in_mean": self.in_mean.tolist(),
            "in_sd": self.in_sd.tolist(),
            "out_mean": self.out_mean.tolist(),
            "out_sd": self.out_sd.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> FeatureExpansion:
        return cls(*(np.asarray(d[k], dtype=float) for k in ("in_mean", "in_sd", "out_mean", "out_sd")))


@dataclass
class Standardizer:
    """Per-column affine scaling, optionally after a log of selected columns."""

    mean: np.ndarray
    sd: np.ndarray
    log_mask: np.ndarray

    @classmethod
    def fit(cls, X, log_mask=None) -> Standardizer:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        mask = np.zeros(X.shape[1], bool) if log_mask is None else np.asarray(log_mask, bool)
        Z = np.where(mask, np.log(np.where(mask, X, 1.0)), X)
        return cls(Z.mean(axis=0), _safe_sd(Z), mask)

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        Z = np.where(self.log_mask, np.log(np.where(self.log_mask, X, 1.0)), X)
        return (Z - self.mean) / self.sd

    def inverse(self, Z) -> np.ndarray:
        X = np.asarray(Z, dtype=float) * self.sd + self.mean
        return np.where(self.log_mask, np.exp(X), X)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "sd": self.sd.tolist(), "log_mask": self.log_mask.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> Standardizer:
        return cls(np.asarray(d["mean"], float), np.asarray(d["sd"], float), np.asarray(d["log_mask"], bool))
