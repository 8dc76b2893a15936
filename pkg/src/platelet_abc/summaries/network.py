"""Small fully connected ReLU network with manual backpropagation and Adam."""

from __future__ import annotations

import numpy as np

DEFAULT_LAYERS = (9, 14, 13, 10, 7)


class MLP:
    """Dense layers with ReLU between them and a linear output layer."""

    def __init__(self, weights: list, biases: list):
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]

    @classmethod
    def init(cls, layers=DEFAULT_LAYERS, seed: int = 0) -> MLP:
        """He-normal weights, zero biases."""
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for n_in, n_out in zip(layers[:-1], layers[1:]):
            weights.append(rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_in, n_out)))
            biases.append(np.zeros(n_out))
        return cls(weights, biases)

    @property
    def layers(self) -> tuple:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    def forward(self, X, keep: bool = False):
        """Output for a batch; with ``keep`` also the per-layer inputs for backprop."""
        h = np.atleast_2d(np.asarray(X, dtype=float))
        cache = [h]
        last = len(self.weights) - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ W + b
            if k < last:
                h = np.maximum(h, 0.0)
            cache.append(h)
        return (h, cache) if keep else h

    def backward(self, cache: list, grad_out: np.ndarray):
        """Gradients of a scalar loss given d loss / d output."""
        gW = [None] * len(self.weights)
        gb = [None] * len(self.weights)
        g = grad_out
        for k in range(len(self.weights) - 1, -1, -1):
            gW[k] = cache[k].T @ g
            gb[k] = g.sum(axis=0)
            if k > 0:
                g = (g @ self.weights[k].T) * (cache[k] > 0)
        return gW, gb

    # flat parameter view, used by the optimizer and gradient checks

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for pair in zip(self.weights, self.biases) for p in pair])

    def set_flat(self, flat) -> None:
        flat = np.asarray(flat, dtype=float)
        i = 0
        for k in range(len(self.weights)):
            for arr in (self.weights[k], self.biases[k]):
                arr[...] = flat[i:i + arr.size].reshape(arr.shape)
                i += arr.size

    @staticmethod
    def flatten_grads(gW, gb) -> np.ndarray:
        return np.concatenate([p.ravel() for pair in zip(gW, gb) for p in pair])

    def copy(self) -> MLP:
        return MLP([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def to_dict(self) -> dict:
        return {
            "layers": list(self.layers),
            "activation": "relu",
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d: dict) -> MLP:
        return cls(d["weights"], d["biases"])


class Adam:
    def __init__(self, size: int, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
