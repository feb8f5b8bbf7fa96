"""Fully connected ReLU network with hand-written reverse mode."""
from __future__ import annotations

import numpy as np

from dfguide.nn.encoding import DenseGrid


class Mlp:
    """``widths = [in, h1, ..., out]``; ReLU on hidden layers, identity on the output.

    Weights are stored ``(fan_in, fan_out)`` so a batch ``x @ W + b`` runs row-major.
    """

    def __init__(self, widths, rng=None, dtype=np.float32, output_scale: float = 1.0):
        rng = np.random.default_rng(0) if rng is None else rng
        self.widths = list(widths)
        self.dtype = dtype
        self.weights = []
        self.biases = []
        n_layers = len(self.widths) - 1
        for k, (fan_in, fan_out) in enumerate(zip(self.widths[:-1], self.widths[1:])):
            bound = np.sqrt(6.0 / fan_in)
            w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            if k == n_layers - 1:
                w = w * output_scale
            self.weights.append(w.astype(dtype))
            self.biases.append(np.zeros(fan_out, dtype=dtype))
        self._acts = None

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def forward(self, x: np.ndarray, keep: bool = False) -> np.ndarray:
        if x.shape[-1] != self.widths[0]:
            raise ValueError(f"expected input width {self.widths[0]}, got {x.shape[-1]}")
        h = x.astype(self.dtype, copy=False)
        acts = [h]
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if k < last:
                np.maximum(h, 0.0, out=h)
            acts.append(h)
        self._acts = acts if keep else None
        return h

    def backward(self, grad_out: np.ndarray, input_grad: bool = False):
        """Gradients of ``sum(grad_out * forward(x))`` for the last ``forward(keep=True)``.

        Returns ``(param_grads, grad_x)``; ``grad_x`` is None unless requested.
        """
        if self._acts is None:
            raise RuntimeError("Mlp.backward called without a preceding forward(keep=True)")
        acts = self._acts
        g = grad_out.astype(self.dtype, copy=False)
        grads = [None] * (2 * len(self.weights))
        for k in range(len(self.weights) - 1, -1, -1):
            if k < len(self.weights) - 1:
                g = g * (acts[k + 1] > 0)
            grads[2 * k] = acts[k].T @ g
            grads[2 * k + 1] = g.sum(axis=0)
            if k > 0 or input_grad:
                g = g @ self.weights[k].T
        return grads, (g if input_grad else None)

    def assert_finite(self):
        for p in self.params:
            if not np.all(np.isfinite(p)):
                raise FloatingPointError("non-finite network parameter")


class GridMlp:
    """Dense-grid position encoding concatenated with precomputed static features, fed to an Mlp."""

    def __init__(self, static_width: int, out_width: int, hidden=(64, 64, 64), rng=None,
                 dtype=np.float32, output_scale: float = 1.0, grid_resolutions=(8, 16, 32),
                 grid_features: int = 2):
        rng = np.random.default_rng(0) if rng is None else rng
        self.grid = DenseGrid(grid_resolutions, grid_features, rng=rng, dtype=dtype)
        self.mlp = Mlp([self.grid.width + static_width, *hidden, out_width], rng=rng, dtype=dtype,
                       output_scale=output_scale)
        self.dtype = dtype

    @property
    def params(self) -> list[np.ndarray]:
        return self.mlp.params + self.grid.params

    def forward(self, p01: np.ndarray, static: np.ndarray, keep: bool = False) -> np.ndarray:
        feats = np.concatenate([self.grid.forward(p01), static.astype(self.dtype, copy=False)], axis=1)
        return self.mlp.forward(feats, keep=keep)

    def backward(self, grad_out: np.ndarray) -> list[np.ndarray]:
        grads, gx = self.mlp.backward(grad_out, input_grad=True)
        return grads + self.grid.backward(gx[:, :self.grid.width])

    def assert_finite(self):
        self.mlp.assert_finite()
        for p in self.grid.params:
            if not np.all(np.isfinite(p)):
                raise FloatingPointError("non-finite grid feature")
