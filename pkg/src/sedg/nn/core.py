"""Dense-network building blocks with explicit forward/backward passes.

Everything runs in float64 on numpy. Layers cache whatever the backward pass
needs, so a layer instance is single-use per forward until backward runs.
"""

from __future__ import annotations

import numpy as np


class DivergenceError(RuntimeError):
    """Training loss became NaN or infinite."""


class Param:
    """A named weight tensor with an accumulated gradient."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    def zero_grad(self):
        self.grad[...] = 0.0


class Layer:
    def params(self) -> list[Param]:
        return []

    def forward(self, x: np.ndarray, training: bool, rng=None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Dense(Layer):
    def __init__(self, n_in: int, n_out: int, rng, name: str = "dense"):
        scale = np.sqrt(2.0 / n_in)
        self.w = Param(f"{name}.w", rng.normal(0.0, scale, size=(n_in, n_out)))
        self.b = Param(f"{name}.b", np.zeros(n_out))
        self._x = None

    def params(self):
        return [self.w, self.b]

    def forward(self, x, training, rng=None):
        self._x = x
        return x @ self.w.value + self.b.value

    def backward(self, grad):
        self.w.grad += self._x.T @ grad
        self.b.grad += grad.sum(axis=0)
        return grad @ self.w.value.T


class Relu(Layer):
    def forward(self, x, training, rng=None):
        self._mask = x > 0
        return x * self._mask

    def backward(self, grad):
        return grad * self._mask


class BatchNorm(Layer):
    """Per-feature normalization; batch statistics while training, running
    statistics at inference."""

    def __init__(self, dim: int, name: str = "bn", momentum: float = 0.1, eps: float = 1e-5):
        self.gamma = Param(f"{name}.gamma", np.ones(dim))
        self.beta = Param(f"{name}.beta", np.zeros(dim))
        self.running_mean = np.zeros(dim)
        self.running_var = np.ones(dim)
        self.momentum = momentum
        self.eps = eps

    def params(self):
        return [self.gamma, self.beta]

    def forward(self, x, training, rng=None):
        if training:
            mu = x.mean(axis=0)
            var = x.var(axis=0)
            self.running_mean = (1 - self.momentum) * self.running_mean + self.momentum * mu
            self.running_var = (1 - self.momentum) * self.running_var + self.momentum * var
            self._inv_std = 1.0 / np.sqrt(var + self.eps)
            self._centered = x - mu
            self._xhat = self._centered * self._inv_std
            self._training = True
        else:
            self._xhat = (x - self.running_mean) / np.sqrt(self.running_var + self.eps)
            self._training = False
        return self.gamma.value * self._xhat + self.beta.value

    def backward(self, grad):
        self.gamma.grad += (grad * self._xhat).sum(axis=0)
        self.beta.grad += grad.sum(axis=0)
        if not self._training:
            return grad * self.gamma.value / np.sqrt(self.running_var + self.eps)
        m = grad.shape[0]
        dxhat = grad * self.gamma.value
        dvar = (dxhat * self._centered).sum(axis=0) * (-0.5) * self._inv_std**3
        dmu = -dxhat.sum(axis=0) * self._inv_std + dvar * (-2.0 / m) * self._centered.sum(axis=0)
        return dxhat * self._inv_std + dvar * 2.0 * self._centered / m + dmu / m


class Dropout(Layer):
    """Inverted dropout; identity at inference."""

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ValueError("dropout rate must be in [0, 1)")
        self.rate = rate

    def forward(self, x, training, rng=None):
        if not training or self.rate == 0.0:
            self._mask = None
            return x
        self._mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * self._mask

    def backward(self, grad):
        if self._mask is None:
            return grad
        return grad * self._mask


class FeatureEmbedder(Layer):
    """Input front end: a lookup table per discrete column, pass-through for
    scaled continuous columns, all concatenated."""

    def __init__(self, columns, embedding_dim: int, rng):
        self.columns = columns
        self.embedding_dim = embedding_dim
        self.tables = {}
        self._segments = []  # (col_index, kind, width)
        for j, c in enumerate(columns):
            if c["kind"] == "discrete":
                self.tables[j] = Param(
                    f"emb.{c['name']}",
                    rng.normal(0.0, 0.1, size=(c["n_values"], embedding_dim)),
                )
                self._segments.append((j, "discrete", embedding_dim))
            else:
                self._segments.append((j, "continuous", 1))
        self.out_dim = sum(w for _, _, w in self._segments)

    def params(self):
        return [self.tables[j] for j, kind, _ in self._segments if kind == "discrete"]

    def forward(self, x, training, rng=None):
        parts = []
        self._indices = {}
        for j, kind, _ in self._segments:
            if kind == "discrete":
                idx = x[:, j].astype(np.int64)
                self._indices[j] = idx
                parts.append(self.tables[j].value[idx])
            else:
                parts.append(x[:, j:j + 1])
        return np.concatenate(parts, axis=1)

    def backward(self, grad):
        offset = 0
        for j, kind, width in self._segments:
            seg = grad[:, offset:offset + width]
            if kind == "discrete":
                np.add.at(self.tables[j].grad, self._indices[j], seg)
            offset += width
        return None  # raw inputs are not differentiated


class Sequential(Layer):
    def __init__(self, layers):
        self.layers = list(layers)

    def params(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def forward(self, x, training, rng=None):
        for layer in self.layers:
            x = layer.forward(x, training, rng)
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(p, q, clamp: float = 1e-12) -> float:
    """Mean over rows of -sum(p * log q); q is clamped away from zero."""
    p = np.atleast_2d(np.asarray(p, dtype=np.float64))
    q = np.atleast_2d(np.asarray(q, dtype=np.float64))
    if p.shape != q.shape:
        raise ValueError("p and q must have the same shape")
    return float(-(p * np.log(np.maximum(q, clamp))).sum(axis=1).mean())


def softmax_cross_entropy(logits: np.ndarray, targets: np.ndarray):
    """Combined softmax + CE against integer targets.

    Returns (mean loss, gradient wrt logits).
    """
    n = logits.shape[0]
    probs = softmax(logits)
    picked = np.maximum(probs[np.arange(n), targets], 1e-12)
    loss = float(-np.log(picked).mean())
    grad = probs.copy()
    grad[np.arange(n), targets] -= 1.0
    return loss, grad / n


def check_finite(loss: float, context: str):
    if not np.isfinite(loss):
        raise DivergenceError(f"{context}: loss became {loss}")
