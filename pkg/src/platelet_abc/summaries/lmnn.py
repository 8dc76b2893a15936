"""Discriminative linear summaries learned with large-margin nearest neighbours."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .features import FeatureExpansion
from .transform import SummaryTransform


@dataclass
class LmnnProblem:
    """Fixed data of one metric-learning run.

    ``E`` holds standardized expanded features, ``targets[i]`` the indices of the
    ``k`` same-label nearest neighbours of item ``i`` (fixed at the start) and
    ``other[i, l]`` is true when items ``i`` and ``l`` carry different labels.
    """

    E: np.ndarray
    labels: np.ndarray
    targets: np.ndarray
    other: np.ndarray
    margin: float = 1.0
    printed_sign: bool = False

    @classmethod
    def build(cls, E, labels, k: int = 3, margin: float = 1.0, printed_sign: bool = False) -> LmnnProblem:
        E = np.asarray(E, dtype=float)
        labels = np.asarray(labels)
        _, counts = np.unique(labels, return_counts=True)
        if counts.min() < k + 1:
            raise ValueError(f"every group needs at least k + 1 = {k + 1} members")
        sq = ((E[:, None, :] - E[None, :, :]) ** 2).sum(axis=-1)
        same = labels[:, None] == labels[None, :]
        np.fill_diagonal(same, False)
        masked = np.where(same, sq, np.inf)
        # stable sort so equal distances resolve to the lower index
        targets = np.argsort(masked, axis=1, kind="stable")[:, :k]
        return cls(E, labels, targets, labels[:, None] != labels[None, :], margin, printed_sign)

    def pair_weights(self, L: np.ndarray) -> tuple[float, np.ndarray]:
        """Loss and the symmetric pair-weight matrix ``W`` with ``grad = 2 L E^T (D - W) E``.

        Pull term over target pairs, hinge over impostor triples. With
        ``printed_sign`` the impostor distance enters the hinge with a plus sign.
        """
        P = self.E @ L.T
        n = P.shape[0]
        d = ((P[:, None, :] - P[None, :, :]) ** 2).sum(axis=-1)
        rows = np.repeat(np.arange(n), self.targets.shape[1])
        cols = self.targets.ravel()
        d_ij = d[rows, cols]
        sign = 1.0 if self.printed_sign else -1.0
        # hinge argument for every (i, j, l); l restricted to other-label items
        z = self.margin + d_ij[:, None] + sign * d[rows]
        active = (z > 0) & self.other[rows]
        loss = d_ij.sum() + np.where(active, z, 0.0).sum()
        W = np.zeros((n, n))
        np.add.at(W, (rows, cols), 1.0 + active.sum(axis=1))
        c_il = np.zeros((n, n))
        np.add.at(c_il, rows, active.astype(float))
        W += sign * c_il
        return float(loss), W + W.T

    def loss_and_grad(self, L) -> tuple[float, np.ndarray]:
        L = np.atleast_2d(np.asarray(L, dtype=float))
        loss, S = self.pair_weights(L)
        lap = np.diag(S.sum(axis=1)) - S
        # sum_{i,m} W_im (e_i - e_m)(e_i - e_m)^T = E^T lap E with S = W + W^T
        grad = 2.0 * L @ (self.E.T @ lap @ self.E)
        return loss, grad

    def loss(self, L) -> float:
        return self.pair_weights(np.atleast_2d(np.asarray(L, dtype=float)))[0]

    def active_set(self, L) -> np.ndarray:
        """Boolean hinge-activity pattern, useful to confirm a point is away from kinks."""
        L = np.atleast_2d(L)
        P = self.E @ L.T
        d = ((P[:, None, :] - P[None, :, :]) ** 2).sum(axis=-1)
        n = P.shape[0]
        rows = np.repeat(np.arange(n), self.targets.shape[1])
        sign = 1.0 if self.printed_sign else -1.0
        z = self.margin + d[rows, self.targets.ravel()][:, None] + sign * d[rows]
        return (z > 0) & self.other[rows]


def knn_loo_accuracy(points, labels, k: int = 3) -> float:
    """Leave-one-out k-nearest-neighbour accuracy with majority vote.

    Vote ties go to the label of the closest neighbour among the tied labels.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    labels = np.asarray(labels)
    d = ((P[:, None, :] - P[None, :, :]) ** 2).sum(axis=-1)
    np.fill_diagonal(d, np.inf)
    order = np.argsort(d, axis=1, kind="stable")[:, :k]
    correct = 0
    for i in range(P.shape[0]):
        neigh = labels[order[i]]
        values, counts = np.unique(neigh, return_counts=True)
        best = values[counts == counts.max()]
        pred = next(lab for lab in neigh if lab in best)
        correct += pred == labels[i]
    return correct / P.shape[0]


def initial_projection(out_dim: int, in_dim: int) -> np.ndarray:
    return np.eye(out_dim, in_dim)


def train_dssl(X, labels, k: int = 3, out_dim: int = 2, step: float = 1e-3,
               max_iter: int = 500, tol: float = 1e-8, margin: float = 1.0,
               printed_sign: bool = False, expansion: FeatureExpansion | None = None) -> SummaryTransform:
    """Fit ``L`` (``out_dim`` x 63) by gradient descent on the large-margin objective.

    Starts from the leading rows of the identity. A step that raises the loss is
    undone and the step size halved, so the recorded loss curve never increases.
    Stops after ``max_iter`` iterations or when the relative loss change of an
    accepted step falls below ``tol``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    labels = np.asarray(labels)
    if np.unique(labels).size < 1 or X.shape[0] != labels.size:
        raise ValueError("need one label per trace")
    expansion = expansion or FeatureExpansion.fit(X)
    E = expansion.transform(X)
    problem = LmnnProblem.build(E, labels, k=k, margin=margin, printed_sign=printed_sign)
    L = initial_projection(out_dim, E.shape[1])
    loss, grad = problem.loss_and_grad(L)
    if not np.isfinite(loss):
        raise FloatingPointError("initial loss is not finite")
    curve = [loss]
    eta = step
    n_halvings = 0
    for _ in range(max_iter):
        cand = L - eta * grad
        new_loss, new_grad = problem.loss_and_grad(cand)
        if not np.isfinite(new_loss):
            raise FloatingPointError(f"loss became non-finite at step size {eta:g}")
        if new_loss > loss:
            eta *= 0.5
            n_halvings += 1
            if eta < 1e-300:
                break
            continue
        change = abs(loss - new_loss) / max(abs(loss), 1e-300)
        L, loss, grad = cand, new_loss, new_grad
        curve.append(loss)
        if change < tol:
            break
    proj = E @ L.T
    provenance = {
        "method": "dssl",
        "k": int(k),
        "out_dim": int(out_dim),
        "step": float(step),
        "final_step": float(eta),
        "halvings": int(n_halvings),
        "max_iter": int(max_iter),
        "tol": float(tol),
        "margin": float(margin),
        "printed_sign": bool(printed_sign),
        "loss_curve": [float(v) for v in curve],
        "final_loss": float(loss),
        "loo_knn_accuracy": float(knn_loo_accuracy(proj, labels, k)),
        "n_train": int(X.shape[0]),
    }
    return SummaryTransform.linear(L, expansion, provenance)


def grid_search_dssl(X, labels, steps=(1e-4, 1e-3, 1e-2), ks=(2, 3, 4), n_clusters=None, **kwargs):
    """Train over a (step, k) grid and keep the transform with the best rand index.

    The score is the rand index between the labels and average-linkage clustering
    of the learned summaries. Ties keep the earlier grid point. The whole grid and
    its scores are stored in the winner's provenance.
    """
    from ..analysis.clustering import hierarchical_cluster, rand_index

    labels = np.asarray(labels)
    n_clusters = n_clusters or np.unique(labels).size
    best, best_score, grid = None, -np.inf, []
    for step, k in itertools.product(steps, ks):
        try:
            tr = train_dssl(X, labels, k=k, step=step, **kwargs)
        except ValueError as exc:
            grid.append({"step": step, "k": k, "error": str(exc)})
            continue
        score = rand_index(labels, hierarchical_cluster(tr.apply(X), n_clusters))
        grid.append({"step": step, "k": k, "rand_index": score})
        if score > best_score:
            best, best_score = tr, score
    if best is None:
        raise ValueError("no grid point could be trained")
    best.provenance["grid_search"] = grid
    best.provenance["rand_index"] = best_score
    return best
