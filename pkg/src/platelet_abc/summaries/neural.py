"""Network summaries: parameter regression and triplet-loss embedding."""

from __future__ import annotations

import numpy as np

from .features import Standardizer
from .network import DEFAULT_LAYERS, MLP, Adam
from .transform import SummaryTransform


# losses with gradients w.r.t. the network outputs ------------------------

def regression_loss(pred, target) -> tuple[float, np.ndarray]:
    """``mean_i ||pred_i - target_i||^2`` and its gradient w.r.t. ``pred``."""
    diff = np.asarray(pred) - np.asarray(target)
    n = diff.shape[0]
    return float((diff**2).sum() / n), 2.0 * diff / n


def triplet_loss(ga, gp, gn, margin: float = 1.0):
    """``mean [||ga-gp||^2 - ||ga-gn||^2 + margin]_+`` and gradients w.r.t. the three embeddings."""
    dp = ((ga - gp) ** 2).sum(axis=1)
    dn = ((ga - gn) ** 2).sum(axis=1)
    z = dp - dn + margin
    active = (z > 0).astype(float)[:, None]
    n = ga.shape[0]
    loss = float(np.maximum(z, 0.0).sum() / n)
    g_a = active * 2.0 * (gn - gp) / n
    g_p = active * -2.0 * (ga - gp) / n
    g_n = active * 2.0 * (ga - gn) / n
    return loss, g_a, g_p, g_n


def network_regression_loss(net: MLP, X, Y):
    """Loss and flat parameter gradient of the regression objective."""
    out, cache = net.forward(X, keep=True)
    loss, g = regression_loss(out, Y)
    return loss, MLP.flatten_grads(*net.backward(cache, g))


def network_triplet_loss(net: MLP, Xa, Xp, Xn, margin: float = 1.0):
    """Loss and flat parameter gradient of the triplet objective (one stacked pass)."""
    n = Xa.shape[0]
    out, cache = net.forward(np.vstack([Xa, Xp, Xn]), keep=True)
    loss, g_a, g_p, g_n = triplet_loss(out[:n], out[n:2 * n], out[2 * n:], margin)
    return loss, MLP.flatten_grads(*net.backward(cache, np.vstack([g_a, g_p, g_n])))


# triplet construction ---------------------------------------------------

def nearest_param_neighbours(Z) -> np.ndarray:
    """Indices of every point's neighbours sorted by distance in (scaled) parameter space."""
    Z = np.asarray(Z, dtype=float)
    d = ((Z[:, None, :] - Z[None, :, :]) ** 2).sum(axis=-1)
    np.fill_diagonal(d, np.inf)
    return np.argsort(d, axis=1, kind="stable")


def sample_triplets(order: np.ndarray, anchors, rng: np.random.Generator, m: int = 5) -> tuple:
    """Positive = nearest parameter neighbour; negative uniform outside the ``m`` nearest."""
    anchors = np.asarray(anchors)
    n = order.shape[0]
    if n < m + 2:
        raise ValueError(f"need at least {m + 2} pilot points to form triplets")
    pos = order[anchors, 0]
    # order[i] lists the n-1 other points; skip the first m
    pick = rng.integers(m, n - 1, size=anchors.size)
    neg = order[anchors, pick]
    return anchors, pos, neg


# training ----------------------------------------------------------------

def _split(n: int, val_fraction: float, rng: np.random.Generator):
    perm = rng.permutation(n)
    n_val = int(round(val_fraction * n)) if n > 1 else 0
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def _check_finite(loss: float, epoch: int):
    if not np.isfinite(loss):
        raise FloatingPointError(f"training loss diverged at epoch {epoch}")


def train_sasl(thetas, xs, epochs: int = 1000, layers=DEFAULT_LAYERS, batch_size: int = 16,
               lr: float = 1e-3, val_fraction: float = 0.1, log_mask=None, seed: int = 0) -> SummaryTransform:
    """Regress standardized parameters on standardized traces with an MLP.

    ``log_mask`` marks parameters regressed on the log scale. The summary is the
    network output (standardized parameter units); ``predict_params`` maps it back.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if thetas.shape[0] == 0 or thetas.shape[0] != xs.shape[0]:
        raise ValueError("pilot set must be nonempty with one trace per parameter vector")
    layers = (xs.shape[1],) + tuple(layers[1:-1]) + (thetas.shape[1],)
    rng = np.random.default_rng(seed)
    tr_idx, va_idx = _split(xs.shape[0], val_fraction, rng)
    scaler = Standardizer.fit(xs[tr_idx])
    target = Standardizer.fit(thetas[tr_idx], log_mask)
    X, Y = scaler.transform(xs), target.transform(thetas)
    net = MLP.init(layers, seed)
    opt = Adam(net.get_flat().size, lr=lr)
    train_curve, val_curve = [], []
    for epoch in range(epochs):
        perm = tr_idx[rng.permutation(tr_idx.size)]
        for start in range(0, perm.size, batch_size):
            b = perm[start:start + batch_size]
            loss, grad = network_regression_loss(net, X[b], Y[b])
            _check_finite(loss, epoch)
            net.set_flat(opt.step(net.get_flat(), grad))
        train_curve.append(regression_loss(net.forward(X[tr_idx]), Y[tr_idx])[0])
        _check_finite(train_curve[-1], epoch)
        if va_idx.size:
            val_curve.append(regression_loss(net.forward(X[va_idx]), Y[va_idx])[0])
    provenance = {
        "method": "sasl", "epochs": int(epochs), "layers": list(layers), "batch_size": int(batch_size),
        "lr": float(lr), "optimizer": "adam", "val_fraction": float(val_fraction), "seed": int(seed),
        "init_seed": int(seed), "train_loss": train_curve, "val_loss": val_curve,
        "validation_indices": va_idx.tolist(),
    }
    return SummaryTransform.from_network(net, scaler, target, provenance)


def train_tlsl(thetas, xs, epochs: int = 2000, margin: float = 1.0, layers=DEFAULT_LAYERS,
               batch_size: int = 16, lr: float = 1e-3, m: int = 5, val_fraction: float = 0.1,
               log_mask=None, seed: int = 0) -> SummaryTransform:
    """Triplet-loss embedding of traces; similarity is nearness in parameter space.

    Every epoch each training point serves once as anchor (random order), with its
    positive and negative drawn among the training points.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if thetas.shape[0] != xs.shape[0]:
        raise ValueError("one trace per parameter vector required")
    layers = (xs.shape[1],) + tuple(layers[1:])
    rng = np.random.default_rng(seed)
    tr_idx, va_idx = _split(xs.shape[0], val_fraction, rng)
    scaler = Standardizer.fit(xs[tr_idx])
    pscale = Standardizer.fit(thetas[tr_idx], log_mask)
    X = scaler.transform(xs)
    Z = pscale.transform(thetas)
    order_tr = tr_idx[nearest_param_neighbours(Z[tr_idx])]
    local = {int(g): i for i, g in enumerate(tr_idx)}
    net = MLP.init(layers, seed)
    opt = Adam(net.get_flat().size, lr=lr)
    train_curve, val_curve = [], []
    val_trip = None
    if va_idx.size >= m + 2:
        order_va = va_idx[nearest_param_neighbours(Z[va_idx])]
        vrng = np.random.default_rng([seed, 1])
        a, p, n_ = sample_triplets(order_va, np.arange(va_idx.size), vrng, m)
        val_trip = (va_idx[a], p, n_)
    for epoch in range(epochs):
        anchors = tr_idx[rng.permutation(tr_idx.size)]
        for start in range(0, anchors.size, batch_size):
            b = np.array([local[int(i)] for i in anchors[start:start + batch_size]])
            a, p, n_ = sample_triplets(order_tr, b, rng, m)
            loss, grad = network_triplet_loss(net, X[tr_idx[a]], X[p], X[n_], margin)
            _check_finite(loss, epoch)
            net.set_flat(opt.step(net.get_flat(), grad))
        a, p, n_ = sample_triplets(order_tr, np.arange(tr_idx.size), np.random.default_rng([seed, 2, epoch]), m)
        out = net.forward(X[tr_idx[a]]), net.forward(X[p]), net.forward(X[n_])
        train_curve.append(triplet_loss(*out, margin)[0])
        _check_finite(train_curve[-1], epoch)
        if val_trip is not None:
            out = tuple(net.forward(X[i]) for i in val_trip)
            val_curve.append(triplet_loss(*out, margin)[0])
    provenance = {
        "method": "tlsl", "epochs": int(epochs), "margin": float(margin), "layers": list(layers),
        "batch_size": int(batch_size), "lr": float(lr), "optimizer": "adam", "negatives_outside": int(m),
        "val_fraction": float(val_fraction), "seed": int(seed), "init_seed": int(seed),
        "param_scaler": pscale.to_dict(), "train_loss": train_curve, "val_loss": val_curve,
        "validation_indices": va_idx.tolist(),
    }
    return SummaryTransform.from_network(net, scaler, None, provenance)
