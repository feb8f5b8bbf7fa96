from __future__ import annotations

import numpy as np

from dfguide.pdf import logits_to_values, values_backward

LUMA = np.array([0.2126, 0.7152, 0.0722])


def luminance(rgb: np.ndarray) -> np.ndarray:
    return rgb @ LUMA.astype(rgb.dtype, copy=False)


def relative_l2_loss(pred: np.ndarray, target: np.ndarray, eps_rel: float = 0.01):
    """Mean of ``(pred - target)^2 / (lum(sg(pred))^2 + eps_rel)`` over rows and channels.

    The denominator is a stop-gradient weight. Returns ``(loss, d loss / d pred)``.
    """
    pred = np.atleast_2d(pred)
    target = np.atleast_2d(target)
    denom = luminance(pred)[:, None] ** 2 + eps_rel
    diff = pred - target
    n = diff.size
    loss = float(np.sum(diff * diff / denom) / n)
    grad = 2.0 * diff / denom / n
    return loss, grad


def weighted_log_density_loss(raw: np.ndarray, idx0, idx1, w0, w1, weights):
    """``-mean(weights * log p)`` where ``p = w0 v[idx0] + w1 v[idx1]`` and ``v`` comes from ``raw``.

    This is the surrogate whose gradient is the score-function estimate of the
    KL gradient. Returns ``(loss, d loss / d raw)`` in float64.
    """
    raw = np.asarray(raw, dtype=np.float64)
    n = raw.shape[0]
    v = logits_to_values(raw)
    rows = np.arange(n)
    p = w0 * v[rows, idx0] + w1 * v[rows, idx1]
    loss = float(-np.sum(weights * np.log(p)) / n)
    coef = -weights / (p * n)
    gv = np.zeros_like(v)
    np.add.at(gv, (rows, idx0), coef * w0)
    np.add.at(gv, (rows, idx1), coef * w1)
    return loss, values_backward(raw, gv)
