"""Discretized 1D densities on [0, 1] and their marginal x conditional product.

A density is stored as ``v``: PDF values at ``M`` uniformly spaced locations.
Arrays are either a single vector of shape ``(M,)`` or a batch ``(N, M)``
paired with ``N`` query points, so the same code serves quadrature checks
(one density, many points) and rendering (one density per shading point).

Everything here works in float64; network logits are upcast on entry.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NEAREST = "nearest"
LINEAR = "linear"
WRAP = "wrap"
CLAMP = "clamp"

FLOOR_SCALE = 1e-8
ONE_MINUS_ULP = np.nextafter(1.0, 0.0)
FOUR_PI = 4.0 * np.pi

_CDF_CHECK_TOL = 1e-6


def _take(v: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Gather bins: ``v`` is ``(M,)`` or ``(B, M)``; ``idx`` is one index per row or a ``(B, K)`` block."""
    if v.ndim == 1:
        return v[idx]
    if idx.ndim == v.ndim:
        return np.take_along_axis(v, idx, axis=-1)
    return np.take_along_axis(v, idx[..., None], axis=-1)[..., 0]


def _clip_unit(eps) -> np.ndarray:
    eps = np.asarray(eps, dtype=np.float64)
    return np.clip(eps, 0.0, ONE_MINUS_ULP)


def softmax(raw: np.ndarray) -> np.ndarray:
    z = raw - raw.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def logits_to_values(raw: np.ndarray) -> np.ndarray:
    """``v = M * softmax(raw)`` blended with a uniform floor of ``1e-8 * M``.

    The blend keeps every entry >= 1e-8 * M while preserving ``sum(v) == M``
    and stays differentiable (see :func:`values_backward`).
    """
    raw = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(raw)):
        raise ValueError("non-finite logits")
    m = raw.shape[-1]
    kappa = FLOOR_SCALE * m
    return m * ((1.0 - kappa) * softmax(raw) + kappa / m)


def values_backward(raw: np.ndarray, grad_v: np.ndarray) -> np.ndarray:
    """Chain a gradient w.r.t. ``v`` back to the logits."""
    raw = np.asarray(raw, dtype=np.float64)
    m = raw.shape[-1]
    s = softmax(raw)
    g = grad_v * (m * (1.0 - FLOOR_SCALE * m))
    return s * (g - np.sum(g * s, axis=-1, keepdims=True))


@dataclass(frozen=True)
class DiscretePdf1D:
    """PDF values ``v`` at bin centers with an interpolation mode and boundary rule.

    ``boundary`` only matters for linear interpolation: ``wrap`` treats the
    domain as periodic (azimuth), ``clamp`` holds the outermost value constant
    over the half-bins at either end (polar coordinate).
    """

    v: np.ndarray
    mode: str = NEAREST
    boundary: str = CLAMP

    def __post_init__(self):
        if self.mode not in (NEAREST, LINEAR):
            raise ValueError(f"unknown interpolation mode {self.mode!r}")
        if self.boundary not in (WRAP, CLAMP):
            raise ValueError(f"unknown boundary rule {self.boundary!r}")

    @classmethod
    def from_logits(cls, raw, mode: str = NEAREST, boundary: str = CLAMP) -> "DiscretePdf1D":
        return cls(logits_to_values(raw), mode, boundary)

    @property
    def size(self) -> int:
        return self.v.shape[-1]

    def eval(self, eps) -> np.ndarray:
        if self.mode == NEAREST:
            return eval_nearest(self.v, eps)
        return eval_linear(self.v, eps, self.boundary)

    def cdf(self, eps) -> np.ndarray:
        knots, values = self.knots()
        return _piecewise_cdf(knots, values, self.mode, eps)

    def sample(self, u) -> tuple[np.ndarray, np.ndarray]:
        return sample_inverse_cdf(self, u)

    def interp_weights(self, eps):
        """Indices ``(i0, i1)`` and weights ``(w0, w1)`` with ``pdf = w0 v[i0] + w1 v[i1]``."""
        if self.mode == NEAREST:
            i = _nearest_index(self.v.shape[-1], eps)
            one = np.ones(i.shape)
            return i, i, one, np.zeros(i.shape)
        return _linear_weights(self.v.shape[-1], eps, self.boundary)

    def knots(self) -> tuple[np.ndarray, np.ndarray]:
        """Breakpoints of the piecewise density and its values there.

        Nearest: ``M + 1`` knots at bin edges, values are per-bin constants.
        Linear: ``M + 2`` knots (0, bin centers, 1) with the density at each.
        """
        v = self.v
        m = v.shape[-1]
        if self.mode == NEAREST:
            return np.linspace(0.0, 1.0, m + 1), v
        x = np.concatenate([[0.0], (np.arange(m) + 0.5) / m, [1.0]])
        if self.boundary == WRAP:
            edge = 0.5 * (v[..., :1] + v[..., -1:])
            y = np.concatenate([edge, v, edge], axis=-1)
        else:
            y = np.concatenate([v[..., :1], v, v[..., -1:]], axis=-1)
        return x, y


def _nearest_index(m: int, eps) -> np.ndarray:
    eps = _clip_unit(eps)
    return np.minimum((eps * m).astype(np.int64), m - 1)


def eval_nearest(v: np.ndarray, eps) -> np.ndarray:
    return _take(v, _nearest_index(v.shape[-1], eps))


def _linear_weights(m: int, eps, boundary: str):
    eps = _clip_unit(eps)
    pos = eps * m - 0.5
    i0 = np.floor(pos).astype(np.int64)
    alpha = pos - i0
    i1 = i0 + 1
    if boundary == WRAP:
        i0 = np.mod(i0, m)
        i1 = np.mod(i1, m)
    else:
        lo = i0 < 0
        hi = i1 > m - 1
        i0 = np.clip(i0, 0, m - 1)
        i1 = np.clip(i1, 0, m - 1)
        # inside a clamped half-bin both indices coincide; keep all weight on one
        alpha = np.where(lo | hi, 0.0, alpha)
    return i0, i1, 1.0 - alpha, alpha


def eval_linear(v: np.ndarray, eps, boundary: str = CLAMP) -> np.ndarray:
    i0, i1, w0, w1 = _linear_weights(v.shape[-1], eps, boundary)
    return w0 * _take(v, i0) + w1 * _take(v, i1)


def _segment_masses(knots: np.ndarray, values: np.ndarray, mode: str) -> np.ndarray:
    widths = np.diff(knots)
    if mode == NEAREST:
        return values * widths
    return 0.5 * (values[..., :-1] + values[..., 1:]) * widths


def _prefix(masses: np.ndarray) -> np.ndarray:
    zero = np.zeros(masses.shape[:-1] + (1,))
    return np.concatenate([zero, np.cumsum(masses, axis=-1)], axis=-1)


def _piecewise_cdf(knots, values, mode, eps) -> np.ndarray:
    eps = np.clip(np.asarray(eps, dtype=np.float64), 0.0, 1.0)
    prefix = _prefix(_segment_masses(knots, values, mode))
    nseg = len(knots) - 1
    k = np.clip(np.searchsorted(knots, eps, side="right") - 1, 0, nseg - 1)
    widths = np.diff(knots)
    w = widths[k]
    t = (eps - knots[k]) / w
    a = _take(values, k)
    if mode == NEAREST:
        inc = a * w * t
    else:
        b = _take(values, np.minimum(k + 1, values.shape[-1] - 1))
        inc = w * (a * t + 0.5 * (b - a) * t * t)
    return _take(prefix, k) + inc


def _locate(prefix: np.ndarray, u: np.ndarray) -> np.ndarray:
    inner = prefix[..., 1:-1]
    if prefix.ndim == 1:
        return np.searchsorted(inner, u, side="right")
    return np.sum(inner <= u[:, None], axis=-1)


def sample_inverse_cdf(pdf: DiscretePdf1D, u) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``eps = P^{-1}(u)``; returns ``(eps, pdf.eval(eps))``.

    Nearest mode inverts a piecewise-linear CDF. Linear mode inverts a
    piecewise-quadratic CDF per segment with the cancellation-free root
    ``t = 2r / (a + sqrt(a^2 + 2 (b - a) r))``; results whose CDF misses ``u``
    by more than 1e-6 are redone by bisection.
    """
    u = np.clip(np.asarray(u, dtype=np.float64), 0.0, ONE_MINUS_ULP)
    knots, values = pdf.knots()
    masses = _segment_masses(knots, values, pdf.mode)
    prefix = _prefix(masses)
    # normalise away round-off so that u in [0, 1) maps into the domain
    total = prefix[..., -1]
    target = u * total
    k = _locate(prefix, target)
    widths = np.diff(knots)
    w = widths[k]
    a = _take(values, k)
    r = (target - _take(prefix, k)) / w
    if pdf.mode == NEAREST:
        t = r / a
    else:
        b = _take(values, k + 1)
        disc = np.maximum(a * a + 2.0 * (b - a) * r, 0.0)
        t = 2.0 * r / (a + np.sqrt(disc))
    t = np.clip(t, 0.0, 1.0)
    eps = np.minimum(knots[k] + w * t, ONE_MINUS_ULP)

    if pdf.mode == LINEAR:
        err = np.abs(_piecewise_cdf(knots, values, LINEAR, eps) - target)
        bad = err > _CDF_CHECK_TOL
        if np.any(bad):
            eps = eps.copy()
            eps[bad] = _bisect(pdf, knots, values, target, bad)
    return eps, pdf.eval(eps)


def _bisect(pdf, knots, values, target, mask) -> np.ndarray:
    vals = values if values.ndim == 1 else values[mask]
    tgt = target[mask]
    lo = np.zeros(tgt.shape)
    hi = np.ones(tgt.shape)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = _piecewise_cdf(knots, vals, pdf.mode, mid) < tgt
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return np.minimum(0.5 * (lo + hi), ONE_MINUS_ULP)


# --- uniform square <-> sphere -------------------------------------------------


def square_to_sphere(eps1, eps2) -> np.ndarray:
    """``phi = 2 pi eps1``, ``theta = arccos(1 - 2 eps2)``; +z is the pole."""
    eps1 = np.asarray(eps1, dtype=np.float64)
    eps2 = np.asarray(eps2, dtype=np.float64)
    phi = 2.0 * np.pi * eps1
    cos_t = 1.0 - 2.0 * eps2
    sin_t = 2.0 * np.sqrt(np.clip(eps2 * (1.0 - eps2), 0.0, None))
    return np.stack([sin_t * np.cos(phi), sin_t * np.sin(phi), cos_t], axis=-1)


def sphere_to_square(w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact inverse of :func:`square_to_sphere` (eps1 in [0, 1), eps2 in [0, 1])."""
    w = np.asarray(w, dtype=np.float64)
    eps1 = np.mod(np.arctan2(w[..., 1], w[..., 0]) / (2.0 * np.pi), 1.0)
    eps1 = np.minimum(eps1, ONE_MINUS_ULP)
    eps2 = np.clip(0.5 * (1.0 - w[..., 2]), 0.0, 1.0)
    return eps1, eps2


def pdf_square_to_solid_angle(pdf_square):
    # d(omega) = sin(theta) dtheta dphi = (2 pi d eps1)(2 d eps2)
    return np.asarray(pdf_square) / FOUR_PI


def pdf_solid_angle_to_square(pdf_solid):
    return np.asarray(pdf_solid) * FOUR_PI


# --- marginal x conditional ----------------------------------------------------


@dataclass(frozen=True)
class SquareSample:
    eps1: np.ndarray
    eps2: np.ndarray
    pdf: np.ndarray


@dataclass(frozen=True)
class DirectionSample:
    direction: np.ndarray
    pdf: np.ndarray


def product_eval(marginal: DiscretePdf1D, conditional: DiscretePdf1D, eps1, eps2) -> np.ndarray:
    """Joint density in square measure; ``conditional`` must be the one queried at ``eps1``."""
    return marginal.eval(eps1) * conditional.eval(eps2)


def product_sample(marginal: DiscretePdf1D, conditional_at, u1, u2) -> SquareSample:
    """Sample ``eps1`` from the marginal, then ``eps2`` from ``conditional_at(eps1)``."""
    eps1, p1 = marginal.sample(u1)
    conditional = conditional_at(eps1)
    eps2, p2 = conditional.sample(u2)
    return SquareSample(eps1, eps2, p1 * p2)


def joint_grid(marginal: DiscretePdf1D, conditional_at, m1: int, m2: int) -> np.ndarray:
    """Joint density on the ``m1 x m2`` bin-center grid (rows: eps1, cols: eps2)."""
    e1 = (np.arange(m1) + 0.5) / m1
    e2 = (np.arange(m2) + 0.5) / m2
    out = np.empty((m1, m2))
    p1 = marginal.eval(e1)
    for i, x in enumerate(e1):
        out[i] = p1[i] * conditional_at(x).eval(e2)
    return out
