"""Input encodings: spherical harmonics, one-blob, triangle wave and a learnable dense grid."""
from __future__ import annotations

import numpy as np

from dfguide import kernels

SH_DEGREE = 4
SH_WIDTH = SH_DEGREE * SH_DEGREE
ONEBLOB_BINS = 4
TRIANGLE_FREQS = 12


def spherical_harmonics(d: np.ndarray) -> np.ndarray:
    """Real SH basis for bands 0..3 (16 coefficients) of unit directions ``(N, 3)``."""
    x, y, z = d[:, 0], d[:, 1], d[:, 2]
    xx, yy, zz = x * x, y * y, z * z
    out = np.empty((d.shape[0], SH_WIDTH), dtype=d.dtype)
    out[:, 0] = 0.28209479177387814
    out[:, 1] = -0.48860251190291987 * y
    out[:, 2] = 0.48860251190291987 * z
    out[:, 3] = -0.48860251190291987 * x
    out[:, 4] = 1.0925484305920792 * x * y
    out[:, 5] = -1.0925484305920792 * y * z
    out[:, 6] = 0.94617469575755997 * zz - 0.31539156525251999
    out[:, 7] = -1.0925484305920792 * x * z
    out[:, 8] = 0.54627421529603959 * (xx - yy)
    out[:, 9] = 0.59004358992664352 * y * (-3.0 * xx + yy)
    out[:, 10] = 2.8906114426405538 * x * y * z
    out[:, 11] = 0.45704579946446572 * y * (1.0 - 5.0 * zz)
    out[:, 12] = 0.3731763325901154 * z * (5.0 * zz - 3.0)
    out[:, 13] = 0.45704579946446572 * x * (1.0 - 5.0 * zz)
    out[:, 14] = 1.4453057213202769 * z * (xx - yy)
    out[:, 15] = 0.59004358992664352 * x * (-xx + 3.0 * yy)
    return out


def one_blob(s: np.ndarray, bins: int = ONEBLOB_BINS) -> np.ndarray:
    """Gaussian kernel (sigma = 1/bins) centred at ``s`` sampled at the bin centres.

    ``s`` has shape ``(N,)`` or ``(N, k)``; each scalar becomes ``bins`` values.
    """
    s = np.asarray(s)
    centers = (np.arange(bins, dtype=s.dtype) + 0.5) / bins
    sigma = 1.0 / bins
    diff = s[..., None] - centers
    out = np.exp(-0.5 * (diff / sigma) ** 2)
    return out.reshape(s.shape[0], -1)


def triangle_wave(s: np.ndarray, freqs: int = TRIANGLE_FREQS, phase: float = 0.0) -> np.ndarray:
    """``tri(s * 2^k + phase)`` for k < freqs with ``tri(t) = 4 |frac(t) - 1/2| - 1`` (period 1)."""
    s = np.asarray(s)
    scaled = s[:, None] * (2.0 ** np.arange(freqs, dtype=s.dtype)) + phase
    frac = scaled - np.floor(scaled)
    return 4.0 * np.abs(frac - 0.5) - 1.0


def eps1_encoding(s: np.ndarray, freqs: int = TRIANGLE_FREQS) -> np.ndarray:
    """Triangle waves in quadrature (phase 0 and a quarter period).

    A single triangle wave is even about 1/2, so ``s`` and ``1 - s`` would
    encode identically; the shifted copy breaks that tie.
    """
    return np.concatenate([triangle_wave(s, freqs), triangle_wave(s, freqs, 0.25)], axis=1)


def encode_static(direction, normal, roughness, eps1=None, dtype=np.float32) -> np.ndarray:
    """Parameter-free part of the encoding, in fixed order.

    direction (SH, 16) | normal (one-blob per component, 12) | roughness
    (one-blob, 4) | eps1 (two triangle-wave phases of 12 frequencies, conditional network only).
    """
    parts = [
        spherical_harmonics(np.asarray(direction, dtype=dtype)),
        one_blob(0.5 * (np.asarray(normal, dtype=dtype) + 1.0)),
        one_blob(np.clip(np.asarray(roughness, dtype=dtype), 0.0, 1.0)),
    ]
    if eps1 is not None:
        parts.append(eps1_encoding(np.asarray(eps1, dtype=dtype)))
    return np.concatenate(parts, axis=1)


def static_width(with_eps1: bool) -> int:
    return SH_WIDTH + 3 * ONEBLOB_BINS + ONEBLOB_BINS + (2 * TRIANGLE_FREQS if with_eps1 else 0)


class DenseGrid:
    """Multi-level dense 3D feature grid with trilinear interpolation over ``[0, 1]^3``."""

    def __init__(self, resolutions=(8, 16, 32), features: int = 2, rng=None, dtype=np.float32,
                 init_scale: float = 1e-4):
        rng = np.random.default_rng(0) if rng is None else rng
        self.resolutions = tuple(int(r) for r in resolutions)
        self.features = features
        self.dtype = dtype
        self.params = [
            rng.uniform(-init_scale, init_scale, size=((r + 1) ** 3, features)).astype(dtype)
            for r in self.resolutions
        ]
        self._cache = None
        self.backend = None  # kernel backend override, mainly for tests

    @property
    def width(self) -> int:
        return len(self.resolutions) * self.features

    def forward(self, p01: np.ndarray) -> np.ndarray:
        p01 = np.ascontiguousarray(p01, dtype=self.dtype)
        out = np.empty((p01.shape[0], self.width), dtype=self.dtype)
        for level, (res, table) in enumerate(zip(self.resolutions, self.params)):
            kernels.grid_forward(p01, table, res, out, level * self.features, backend=self.backend)
        self._cache = p01
        return out

    def backward(self, grad_out: np.ndarray) -> list[np.ndarray]:
        if self._cache is None:
            raise RuntimeError("DenseGrid.backward called before forward")
        grad_out = np.ascontiguousarray(grad_out, dtype=self.dtype)
        grads = []
        for level, (res, table) in enumerate(zip(self.resolutions, self.params)):
            g = np.zeros(table.shape)
            kernels.grid_backward(self._cache, grad_out, res, level * self.features, g, backend=self.backend)
            grads.append(g.astype(self.dtype))
        return grads
