"""Fit the factorized PDF networks to a fixed analytic density on the unit square.

Used to compare interpolation modes in isolation from rendering noise: the
shading point is held fixed, samples are drawn uniformly (q = 1) and the
score-function loss is weighted by the target density.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from dfguide.guiding.system import GuideConfig, GuidingSystem
from dfguide.guiding.trainer import square_log_density_gradients
from dfguide.nn import adam_step
from dfguide.pdf import joint_grid

# two lobes: (weight, mu1, mu2, sigma1, sigma2); eps1 wraps, eps2 does not
BIMODAL_LOBES = ((0.6, 0.2, 0.3, 0.05, 0.06), (0.4, 0.75, 0.7, 0.07, 0.05))


def _wrapped_normal(x, mu, sigma, wraps=3):
    out = np.zeros_like(x)
    for k in range(-wraps, wraps + 1):
        out += np.exp(-0.5 * ((x - mu + k) / sigma) ** 2)
    return out / (sigma * np.sqrt(2.0 * np.pi))


def _normal(x, mu, sigma):
    return np.exp(-0.5 * ((x - mu) / sigma) ** 2) / (sigma * np.sqrt(2.0 * np.pi))


@dataclass(frozen=True)
class BimodalTarget:
    """Mixture of two separable lobes, normalised over the square by midpoint quadrature."""

    lobes: tuple = BIMODAL_LOBES
    quadrature: int = 2048

    def _raw(self, e1, e2):
        out = np.zeros(np.broadcast(e1, e2).shape)
        for w, m1, m2, s1, s2 in self.lobes:
            out += w * _wrapped_normal(e1, m1, s1) * _normal(e2, m2, s2)
        return out

    @property
    def norm(self) -> float:
        n = self.quadrature
        g = (np.arange(n) + 0.5) / n
        return float(self._raw(g[:, None], g[None, :]).mean())

    def density(self, e1, e2):
        return self._raw(np.asarray(e1, dtype=np.float64), np.asarray(e2, dtype=np.float64)) / self.norm

    def grid(self, m1: int, m2: int) -> np.ndarray:
        """Cell averages on an ``m1 x m2`` grid (rows eps1) by 8x8 sub-sampling."""
        s = 8
        a = (np.arange(m1 * s) + 0.5) / (m1 * s)
        b = (np.arange(m2 * s) + 0.5) / (m2 * s)
        d = self.density(a[:, None], b[None, :])
        return d.reshape(m1, s, m2, s).mean(axis=(1, 3))


@dataclass
class FitHistory:
    steps: list = field(default_factory=list)
    l1: list = field(default_factory=list)
    kl: list = field(default_factory=list)


def learned_grid(system: GuidingSystem, cond, m1: int, m2: int) -> np.ndarray:
    """Learned joint density on the ``m1 x m2`` grid of cell centers (rows eps1)."""
    marginal = system.marginal_pdf(cond)
    return joint_grid(marginal, lambda e: system.conditional_pdf(cond.subset(np.zeros(1, dtype=int)),
                                                                 np.atleast_1d(e)), m1, m2)


def grid_l1(learned: np.ndarray, target: np.ndarray) -> float:
    """Mean absolute difference after scaling each grid by its own maximum."""
    return float(np.mean(np.abs(learned / learned.max() - target / target.max())))


def grid_kl(learned: np.ndarray, target: np.ndarray) -> float:
    """``KL(target || learned)`` by cell-average quadrature on the square."""
    t = target / target.mean()
    q = learned / learned.mean()
    return float(np.mean(t * np.log(np.maximum(t, 1e-300) / q)))


def fit_synthetic(mode: str, steps: int = 2000, batch: int = 1024, seed: int = 0, eval_every: int = 100,
                  target: BimodalTarget | None = None, m1: int = 32, m2: int = 16,
                  eval_grid: tuple = (64, 32), lr: float | None = None) -> tuple[GuidingSystem, FitHistory]:
    target = target or BimodalTarget()
    cfg = GuideConfig(mode=mode, m1=m1, m2=m2, seed=seed)
    if lr is not None:
        cfg.pdf_lr = lr
    system = GuidingSystem(np.zeros(3), np.ones(3), cfg)
    rng = np.random.default_rng([seed, 7])
    x = np.full((batch, 3), 0.5)
    wo = np.tile([0.0, 0.0, 1.0], (batch, 1))
    cond = system.condition(x, wo, wo, np.full(batch, 0.5))
    probe = cond.subset(np.zeros(1, dtype=int))
    ref = target.grid(*eval_grid)
    hist = FitHistory()

    def record(step):
        g = learned_grid(system, probe, *eval_grid)
        hist.steps.append(step)
        hist.l1.append(grid_l1(g, ref))
        hist.kl.append(grid_kl(g, ref))

    record(0)
    for step in range(1, steps + 1):
        e1, e2 = rng.random(batch), rng.random(batch)
        _, g1, g2 = square_log_density_gradients(system, cond, e1, e2, target.density(e1, e2))
        adam_step(system.marginal.params, g1, system.marginal_state, cfg.pdf_lr)
        adam_step(system.conditional.params, g2, system.conditional_state, cfg.pdf_lr)
        if step % eval_every == 0 or step == steps:
            record(step)
    system.assert_finite()
    return system, hist
