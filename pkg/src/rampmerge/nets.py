"""Small fully connected networks with hand-written backprop and Adam.

Everything is float64 numpy. Each network's parameters live in one flat
vector; the per-layer weight (fan_in, fan_out) and bias views share its
memory, so optimizer updates are single vectorized operations. Hidden layers
use rectifier activations; the output layer is either ``tanh`` (actor) or
``linear`` (critic).
"""

from __future__ import annotations

import numpy as np


class MLPParams:
    """Parameter container: flat vector plus per-layer weight/bias views."""

    def __init__(self, layer_sizes: list[int], activation: str, flat: np.ndarray | None = None):
        if activation not in ("tanh", "linear"):
            raise ValueError(f"unsupported output activation: {activation!r}")
        self.layer_sizes = list(layer_sizes)
        self.activation = activation
        self._spans = []  # (w_start, w_shape, b_start, b_len) per layer
        offset = 0
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            self._spans.append((offset, (fan_in, fan_out), offset + fan_in * fan_out, fan_out))
            offset += fan_in * fan_out + fan_out
        self.size = offset
        if flat is None:
            flat = np.zeros(offset, dtype=np.float64)
        elif flat.shape != (offset,):
            raise ValueError(f"flat vector has size {flat.shape}, expected ({offset},)")
        self.flat = flat
        self.weights, self.biases = self.layer_views(self.flat)

    def layer_views(self, flat: np.ndarray):
        """Weight/bias views of any vector with this network's layout."""
        weights, biases = [], []
        for w_start, w_shape, b_start, b_len in self._spans:
            weights.append(flat[w_start : w_start + w_shape[0] * w_shape[1]].reshape(w_shape))
            biases.append(flat[b_start : b_start + b_len])
        return weights, biases

    def copy(self) -> "MLPParams":
        return MLPParams(self.layer_sizes, self.activation, self.flat.copy())

    def all_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.flat)))


def init_mlp(layer_sizes: list[int], activation: str, rng: np.random.Generator) -> MLPParams:
    """Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer."""
    params = MLPParams(layer_sizes, activation)
    for w, b in zip(params.weights, params.biases):
        bound = 1.0 / np.sqrt(w.shape[0])
        w[...] = rng.uniform(-bound, bound, size=w.shape)
        b[...] = rng.uniform(-bound, bound, size=b.shape)
    return params


def mlp_forward(params: MLPParams, x: np.ndarray, cache: bool = False):
    """Forward pass on a (batch, features) array.

    With ``cache=True`` returns ``(y, cache)`` where the cache holds the layer
    inputs and preactivations needed by :func:`mlp_backward`.
    """
    n_layers = len(params.weights)
    inputs = [x]
    preacts = []
    h = x
    for k in range(n_layers):
        z = h @ params.weights[k] + params.biases[k]
        preacts.append(z)
        if k < n_layers - 1:
            h = np.maximum(z, 0.0)
        elif params.activation == "tanh":
            h = np.tanh(z)
        else:
            h = z
        inputs.append(h)
    if cache:
        return h, (inputs, preacts)
    return h


def mlp_backward(params: MLPParams, cache, grad_out: np.ndarray, out: np.ndarray | None = None):
    """Backprop a gradient at the output down to parameters and input.

    ``grad_out`` must already include any batch-mean scaling. Returns
    ``(grad_flat, grad_input)``; ``grad_flat`` follows the parameter layout
    and is written into ``out`` when given.
    """
    inputs, preacts = cache
    n_layers = len(params.weights)
    grad_flat = out if out is not None else np.empty(params.size, dtype=np.float64)
    grad_w, grad_b = params.layer_views(grad_flat)

    if params.activation == "tanh":
        y = inputs[-1]
        dz = grad_out * (1.0 - y * y)
    else:
        dz = grad_out
    for k in range(n_layers - 1, -1, -1):
        np.matmul(inputs[k].T, dz, out=grad_w[k])
        dz.sum(axis=0, out=grad_b[k])
        dh = dz @ params.weights[k].T
        if k > 0:
            dz = dh * (preacts[k - 1] > 0.0)
    return grad_flat, dh


class Adam:
    """Standard Adam with bias correction, one instance per network."""

    def __init__(self, params: MLPParams, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = np.zeros(params.size, dtype=np.float64)
        self.v = np.zeros(params.size, dtype=np.float64)
        self._scratch = np.empty(params.size, dtype=np.float64)

    def step(self, params: MLPParams, grad_flat: np.ndarray) -> None:
        """One minimizing update; negate the gradient beforehand to ascend."""
        self.t += 1
        m, v, scratch = self.m, self.v, self._scratch
        np.multiply(grad_flat, 1.0 - self.beta1, out=scratch)
        m *= self.beta1
        m += scratch
        np.multiply(grad_flat, grad_flat, out=scratch)
        scratch *= 1.0 - self.beta2
        v *= self.beta2
        v += scratch
        np.divide(v, 1.0 - self.beta2 ** self.t, out=scratch)
        np.sqrt(scratch, out=scratch)
        scratch += self.eps
        np.divide(m, scratch, out=scratch)
        scratch *= self.lr / (1.0 - self.beta1 ** self.t)
        params.flat -= scratch


def soft_update(target: MLPParams, online: MLPParams, tau: float = 0.001) -> None:
    """In-place convex blend: target <- tau * online + (1 - tau) * target."""
    target.flat *= 1.0 - tau
    target.flat += tau * online.flat
