"""Learned summary maps ``x -> s(x)`` and their JSON form."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .features import FeatureExpansion, Standardizer
from .network import MLP

KINDS = ("identity", "linear", "network")


class UntrainedTransformError(RuntimeError):
    pass


def _as_rows(x) -> tuple[np.ndarray, bool]:
    if hasattr(x, "vector"):
        x = x.vector()
    x = np.asarray(x, dtype=float)
    return np.atleast_2d(x), x.ndim == 1


@dataclass
class SummaryTransform:
    """A deterministic summary map.

    ``linear``: ``s(x) = L @ expansion(x)`` (no expansion means ``L @ x``).
    ``network``: ``s(x) = net(scaler(x))``.
    ``identity``: ``s(x) = x``.

    ``input_dim`` is checked on every call. ``provenance`` records how the map was
    obtained (method, hyperparameters, seed, loss curves).
    """

    kind: str
    input_dim: int
    matrix: np.ndarray | None = None
    expansion: FeatureExpansion | None = None
    network: MLP | None = None
    scaler: Standardizer | None = None
    target_scaler: Standardizer | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown transform kind {self.kind!r}")
        if self.matrix is not None:
            self.matrix = np.atleast_2d(np.asarray(self.matrix, dtype=float))

    # constructors --------------------------------------------------------

    @classmethod
    def identity(cls, dim: int = 9) -> SummaryTransform:
        return cls("identity", dim)

    @classmethod
    def linear(cls, matrix, expansion: FeatureExpansion | None = None, provenance=None) -> SummaryTransform:
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        dim = expansion.input_dim if expansion is not None else matrix.shape[1]
        if expansion is not None and expansion.output_dim != matrix.shape[1]:
            raise ValueError("matrix width does not match the expanded dimension")
        return cls("linear", dim, matrix=matrix, expansion=expansion, provenance=dict(provenance or {}))

    @classmethod
    def from_network(cls, net: MLP, scaler: Standardizer | None = None,
                     target_scaler: Standardizer | None = None, provenance=None) -> SummaryTransform:
        return cls("network", net.layers[0], network=net, scaler=scaler,
                   target_scaler=target_scaler, provenance=dict(provenance or {}))

    # evaluation ----------------------------------------------------------

    @property
    def output_dim(self) -> int:
        if self.kind == "identity":
            return self.input_dim
        if self.kind == "linear":
            return self.matrix.shape[0]
        return self.network.layers[-1]

    @property
    def metric(self) -> np.ndarray:
        """``M = L^T L`` for linear transforms."""
        if self.kind != "linear":
            raise ValueError("metric is defined for linear transforms only")
        return self.matrix.T @ self.matrix

    def features(self, x) -> np.ndarray:
        """Inputs to the final map: expanded features for linear kinds, scaled inputs for networks."""
        X, single = _as_rows(x)
        self._check(X)
        if self.kind == "linear" and self.expansion is not None:
            X = self.expansion.transform(X)
        elif self.kind == "network" and self.scaler is not None:
            X = self.scaler.transform(X)
        return X[0] if single else X

    def apply(self, x) -> np.ndarray:
        X, single = _as_rows(x)
        self._check(X)
        if self.kind == "identity":
            out = X.copy()
        elif self.kind == "linear":
            if self.matrix is None:
                raise UntrainedTransformError("linear transform has no matrix")
            F = self.expansion.transform(X) if self.expansion is not None else X
            out = F @ self.matrix.T
        else:
            if self.network is None:
                raise UntrainedTransformError("network transform has no weights")
            F = self.scaler.transform(X) if self.scaler is not None else X
            out = self.network.forward(F)
        return out[0] if single else out

    __call__ = apply

    def predict_params(self, x) -> np.ndarray:
        """For regression networks, the output mapped back to parameter units."""
        if self.target_scaler is None:
            raise ValueError("transform has no target scaling")
        return self.target_scaler.inverse(self.apply(x))

    def _check(self, X: np.ndarray):
        if X.shape[-1] != self.input_dim:
            raise ValueError(f"transform expects {self.input_dim} values, got {X.shape[-1]}")

    # persistence ---------------------------------------------------------

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "input_dim": self.input_dim, "provenance": self.provenance}
        if self.matrix is not None:
            d["matrix"] = self.matrix.tolist()
        if self.expansion is not None:
            d["expansion"] = self.expansion.to_dict()
        if self.network is not None:
            d["network"] = self.network.to_dict()
        if self.scaler is not None:
            d["scaler"] = self.scaler.to_dict()
        if self.target_scaler is not None:
            d["target_scaler"] = self.target_scaler.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> SummaryTransform:
        return cls(
            kind=d["kind"],
            input_dim=int(d["input_dim"]),
            matrix=None if "matrix" not in d else np.asarray(d["matrix"], dtype=float),
            expansion=FeatureExpansion.from_dict(d["expansion"]) if "expansion" in d else None,
            network=MLP.from_dict(d["network"]) if "network" in d else None,
            scaler=Standardizer.from_dict(d["scaler"]) if "scaler" in d else None,
            target_scaler=Standardizer.from_dict(d["target_scaler"]) if "target_scaler" in d else None,
            provenance=d.get("provenance", {}),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> SummaryTransform:
        return cls.from_dict(json.loads(Path(path).read_text()))


def apply_summary(transform: SummaryTransform, x) -> np.ndarray:
    return transform.apply(x)
