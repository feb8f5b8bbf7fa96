"""The marginal, conditional and radiance-cache networks and the guided sampling routines."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from dfguide.nn import AdamState, GridMlp, encode_static, static_width, eps1_encoding
from dfguide.pdf import (
    CLAMP,
    FOUR_PI,
    LINEAR,
    NEAREST,
    WRAP,
    DirectionSample,
    DiscretePdf1D,
    sphere_to_square,
    square_to_sphere,
)
from dfguide.render.bsdf import bsdf_eval, bsdf_pdf, bsdf_sample, dot

RESOLUTIONS = {(16, 8), (32, 16), (64, 32)}
CACHE_MODES = ("off", "li-only", "full")


@dataclass
class GuideConfig:
    mode: str = LINEAR
    m1: int = 32
    m2: int = 16
    cache: str = "full"
    hidden: tuple = (64, 64, 64)
    grid_resolutions: tuple = (8, 16, 32)
    grid_features: int = 2
    # x0.1 leaves the fresh guide 30-40% off uniform; this keeps it within 2%
    pdf_output_scale: float = 0.003
    pdf_lr: float = 3e-2
    # per-batch cap on p_hat / q for the PDF update; 1.0 disables it
    weight_clip_quantile: float = 0.99
    cache_lr: float = 1e-2
    eps_rel: float = 0.01
    delta_norm: float = 1e-4
    dtype: type = np.float32
    seed: int = 0

    def __post_init__(self):
        if self.mode not in (NEAREST, LINEAR):
            raise ValueError(f"unknown interpolation mode {self.mode!r}")
        if self.cache not in CACHE_MODES:
            raise ValueError(f"cache mode must be one of {CACHE_MODES}")
        if self.m1 < 2 or self.m2 < 2:
            raise ValueError("resolution must be at least 2 in each dimension")
        if not 0.0 < self.weight_clip_quantile <= 1.0:
            raise ValueError("weight_clip_quantile must lie in (0, 1]")


@dataclass
class Condition:
    """Encoded network inputs shared by all three networks at a set of shading points."""

    p01: np.ndarray
    static: np.ndarray
    clamped: int = 0

    def __len__(self):
        return len(self.p01)

    def subset(self, idx) -> "Condition":
        return Condition(self.p01[idx], self.static[idx], 0)


class GuidingSystem:
    """Owns ``f_marginal(x, wo) -> M1 logits``, ``f_conditional(x, wo, eps1) -> M2 logits``
    and the radiance cache ``f_cache(x, wo) -> RGB``, each with its Adam state."""

    def __init__(self, bounds_min, bounds_max, config: GuideConfig | None = None):
        self.config = config = config or GuideConfig()
        self.bounds_min = np.asarray(bounds_min, dtype=np.float64)
        self.bounds_max = np.asarray(bounds_max, dtype=np.float64)
        rng = np.random.default_rng(config.seed)
        kw = dict(hidden=config.hidden, rng=rng, dtype=config.dtype,
                  grid_resolutions=config.grid_resolutions, grid_features=config.grid_features)
        self.marginal = GridMlp(static_width(False), config.m1, output_scale=config.pdf_output_scale, **kw)
        self.conditional = GridMlp(static_width(True), config.m2, output_scale=config.pdf_output_scale, **kw)
        self.cache = GridMlp(static_width(False), 3, output_scale=0.0, **kw)
        self.marginal_state = AdamState.for_params(self.marginal.params, lr=config.pdf_lr)
        self.conditional_state = AdamState.for_params(self.conditional.params, lr=config.pdf_lr)
        self.cache_state = AdamState.for_params(self.cache.params, lr=config.cache_lr)
        self.clamped_positions = 0

    @property
    def mode(self) -> str:
        return self.config.mode

    # --- inputs -----------------------------------------------------------------

    def condition(self, x, wo, normal, roughness) -> Condition:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        ext = np.maximum(self.bounds_max - self.bounds_min, 1e-12)
        p = (x - self.bounds_min) / ext
        outside = int(np.any((p < -1e-9) | (p > 1.0 + 1e-9), axis=1).sum())
        self.clamped_positions += outside
        static = encode_static(np.atleast_2d(wo), np.atleast_2d(normal),
                               np.atleast_1d(np.asarray(roughness, dtype=np.float64)), dtype=self.config.dtype)
        return Condition(np.clip(p, 0.0, 1.0).astype(self.config.dtype), static, outside)

    def conditional_static(self, cond: Condition, eps1) -> np.ndarray:
        return np.concatenate([cond.static, eps1_encoding(np.asarray(eps1, dtype=self.config.dtype))], axis=1)

    # --- networks ---------------------------------------------------------------

    def marginal_logits(self, cond: Condition, keep: bool = False) -> np.ndarray:
        return self.marginal.forward(cond.p01, cond.static, keep=keep)

    def conditional_logits(self, cond: Condition, eps1, keep: bool = False) -> np.ndarray:
        return self.conditional.forward(cond.p01, self.conditional_static(cond, eps1), keep=keep)

    def marginal_pdf_from_raw(self, raw) -> DiscretePdf1D:
        # eps1 is the azimuth: periodic
        return DiscretePdf1D.from_logits(raw, self.mode, WRAP)

    def conditional_pdf_from_raw(self, raw) -> DiscretePdf1D:
        return DiscretePdf1D.from_logits(raw, self.mode, CLAMP)

    def marginal_pdf(self, cond: Condition) -> DiscretePdf1D:
        return self.marginal_pdf_from_raw(self.marginal_logits(cond))

    def conditional_pdf(self, cond: Condition, eps1) -> DiscretePdf1D:
        return self.conditional_pdf_from_raw(self.conditional_logits(cond, eps1))

    def cache_raw(self, cond: Condition, keep: bool = False) -> np.ndarray:
        return self.cache.forward(cond.p01, cond.static, keep=keep)

    def cache_query(self, cond: Condition) -> np.ndarray:
        """Cached reflected radiance, clamped to be non-negative."""
        return np.maximum(self.cache_raw(cond).astype(np.float64), 0.0)

    # --- density ----------------------------------------------------------------

    def guide_pdf(self, cond: Condition, wi) -> np.ndarray:
        """Solid-angle density of the learned product distribution at world directions ``wi``."""
        eps1, eps2 = sphere_to_square(wi)
        p1 = self.marginal_pdf(cond).eval(eps1)
        p2 = self.conditional_pdf(cond, eps1).eval(eps2)
        return p1 * p2 / FOUR_PI

    def guide_sample(self, cond: Condition, u1, u2) -> DirectionSample:
        eps1, p1 = self.marginal_pdf(cond).sample(u1)
        eps2, p2 = self.conditional_pdf(cond, eps1).sample(u2)
        return DirectionSample(square_to_sphere(eps1, eps2), p1 * p2 / FOUR_PI)

    def params(self) -> list[np.ndarray]:
        return self.marginal.params + self.conditional.params + self.cache.params

    def param_hash(self) -> str:
        h = hashlib.sha256()
        for p in self.params():
            h.update(np.ascontiguousarray(p).tobytes())
        return h.hexdigest()

    def assert_finite(self):
        self.marginal.assert_finite()
        self.conditional.assert_finite()
        self.cache.assert_finite()


@dataclass
class MixedSample:
    wi: np.ndarray
    pdf: np.ndarray  # combined solid-angle density actually used
    f: np.ndarray  # BSDF value (RGB)
    cos: np.ndarray
    weight: np.ndarray  # f * cos / pdf, zero where rejected
    from_guide: np.ndarray
    rejected: np.ndarray  # pdf == 0


def mixed_sample(system: GuidingSystem, cond: Condition, mats, mid, n, wo, u, alpha: float) -> MixedSample:
    """One-sample mixture of the guide (probability ``alpha``) and BSDF importance sampling.

    ``u`` is ``(N, 3)``: branch selector and two direction dimensions. The
    returned pdf is ``alpha * p_guide + (1 - alpha) * p_bsdf`` evaluated at the
    chosen direction whichever branch produced it. Only for non-delta BSDFs.
    """
    count = len(mid)
    use_guide = u[:, 0] < alpha
    bs = bsdf_sample(mats, mid, n, wo, u[:, 1:3])
    wi = bs.wi.copy()
    if alpha > 0.0:
        marginal = system.marginal_pdf(cond)
        eps1_b, eps2_b = sphere_to_square(bs.wi)
        eps1 = eps1_b.copy()
        if np.any(use_guide):
            eps1_g, _ = DiscretePdf1D(marginal.v[use_guide], marginal.mode, WRAP).sample(u[use_guide, 1])
            eps1[use_guide] = eps1_g
        conditional = system.conditional_pdf(cond, eps1)
        eps2 = eps2_b.copy()
        if np.any(use_guide):
            eps2_g, _ = DiscretePdf1D(conditional.v[use_guide], conditional.mode, CLAMP).sample(u[use_guide, 2])
            eps2[use_guide] = eps2_g
            wi[use_guide] = square_to_sphere(eps1[use_guide], eps2_g)
        p_guide = marginal.eval(eps1) * conditional.eval(eps2) / FOUR_PI
    else:
        p_guide = np.zeros(count)
    p_bsdf = bsdf_pdf(mats, mid, n, wo, wi)
    pdf = alpha * p_guide + (1.0 - alpha) * p_bsdf
    f = bsdf_eval(mats, mid, n, wo, wi)
    cos = np.abs(dot(n, wi))
    rejected = ~(pdf > 0.0)
    safe = np.where(rejected, 1.0, pdf)
    weight = np.where(rejected[:, None], 0.0, f * (cos / safe)[:, None])
    return MixedSample(wi, pdf, f, cos, weight, use_guide, rejected)
