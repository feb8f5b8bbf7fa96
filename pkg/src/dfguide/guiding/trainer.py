"""Online training: radiance-cache regression and the KL score-function update of the PDF networks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from dfguide.guiding.records import PathVertexRecords
from dfguide.guiding.system import GuidingSystem
from dfguide.nn import adam_step, luminance, relative_l2_loss, weighted_log_density_loss
from dfguide.pdf import sphere_to_square

MIN_Q = 1e-12


@dataclass
class TrainSchedule:
    """Sample budget split into waves; training runs only for the leading ``train_fraction``."""

    total_spp: int
    wave_spp: int = 1
    train_fraction: float = 0.3
    guide_fraction: float = 0.7
    minibatches: int = 4

    def __post_init__(self):
        if self.total_spp < 1 or self.wave_spp < 1:
            raise ValueError("sample budget and wave size must be positive")
        if not (0.0 <= self.train_fraction <= 1.0 and 0.0 <= self.guide_fraction <= 1.0):
            raise ValueError("fractions must lie in [0, 1]")
        if self.minibatches < 4:
            raise ValueError("at least four mini-batches per frame")

    @property
    def n_waves(self) -> int:
        return math.ceil(self.total_spp / self.wave_spp)

    @property
    def n_train_waves(self) -> int:
        return int(math.floor(self.train_fraction * self.n_waves + 1e-9))

    def is_training(self, wave: int) -> bool:
        return wave < self.n_train_waves

    def guide_alpha(self, wave: int) -> float:
        # the first wave only seeds the cache
        return 0.0 if wave == 0 else self.guide_fraction


@dataclass
class FrameStats:
    trained: bool
    n_records: int = 0
    batch_size: int = 0
    cache_losses: list = field(default_factory=list)
    guide_losses: list = field(default_factory=list)
    dropped_low_q: int = 0


def square_log_density_gradients(system: GuidingSystem, cond, eps1, eps2, weights):
    """``-mean(weights * log p_theta(eps1, eps2))`` and its gradients for the marginal and conditional nets.

    ``p_theta`` is the product density on the unit square; both networks get
    their share of the same joint loss.
    """
    raw1 = system.marginal_logits(cond, keep=True)
    raw2 = system.conditional_logits(cond, eps1, keep=True)
    i0, i1, w0, w1 = system.marginal_pdf_from_raw(raw1).interp_weights(eps1)
    loss1, g1 = weighted_log_density_loss(raw1, i0, i1, w0, w1, weights)
    i0, i1, w0, w1 = system.conditional_pdf_from_raw(raw2).interp_weights(eps2)
    loss2, g2 = weighted_log_density_loss(raw2, i0, i1, w0, w1, weights)
    dt = system.config.dtype
    grads1 = system.marginal.backward(g1.astype(dt))
    grads2 = system.conditional.backward(g2.astype(dt))
    return loss1 + loss2, grads1, grads2


def batch_weights(w: np.ndarray, quantile: float) -> np.ndarray:
    """Score-function weights for one mini-batch: capped at the batch ``quantile``, then scaled to unit mean.

    Batches here hold about a thousand records. One record with a huge
    ``p_hat / q``, or one batch much heavier than the ones before it, makes Adam
    take several oversized steps in a row, and those steps kill the ReLU units
    of the PDF networks. Both steps only change what the guide is fitted to;
    rendering stays unbiased.
    """
    if quantile < 1.0 and w.size:
        w = np.minimum(w, np.quantile(w, quantile))
    mean = float(np.mean(w)) if w.size else 0.0
    return w / mean if mean > 0.0 else w


class GuidingTrainer:
    def __init__(self, system: GuidingSystem, schedule: TrainSchedule):
        self.system = system
        self.schedule = schedule
        self.dropped_low_q = 0

    # --- radiance cache ---------------------------------------------------------

    def train_cache(self, rec: PathVertexRecords) -> float:
        """One relative-L2 Adam step of the cache on ``(x, wo) -> l_r``."""
        if len(rec) == 0:
            return 0.0
        sys_ = self.system
        cond = sys_.condition(rec.x, rec.wo, rec.normal, rec.roughness)
        pred = sys_.cache_raw(cond, keep=True)
        loss, grad = relative_l2_loss(pred.astype(np.float64), rec.l_r, sys_.config.eps_rel)
        grads = sys_.cache.backward(grad.astype(sys_.config.dtype))
        adam_step(sys_.cache.params, grads, sys_.cache_state, sys_.config.cache_lr)
        return loss

    # --- target density ---------------------------------------------------------

    def incoming_radiance(self, rec: PathVertexRecords) -> np.ndarray:
        """``L_i(x, wi)``: exact emission/environment plus cached reflected radiance at the next hit.

        Falls back to the path-suffix estimate when the next vertex is a delta
        surface (the cache is not trained there) and when the cache is off.
        """
        if self.system.config.cache == "off":
            return rec.l_in
        li = rec.next_emission.copy()
        use = rec.next_hit & ~rec.next_delta
        if np.any(use):
            c = self.system.condition(rec.next_x[use], rec.next_wo[use], rec.next_normal[use],
                                      rec.next_roughness[use])
            li[use] += self.system.cache_query(c)
        delta = rec.next_hit & rec.next_delta
        li[delta] = rec.l_in[delta]
        return li

    def normalization(self, rec: PathVertexRecords) -> np.ndarray:
        if self.system.config.cache != "full":
            return np.ones(len(rec))
        cond = self.system.condition(rec.x, rec.wo, rec.normal, rec.roughness)
        lr = luminance(self.system.cache_query(cond))
        return np.maximum(lr, self.system.config.delta_norm)

    def estimate_target(self, rec: PathVertexRecords) -> np.ndarray:
        """``p_hat(wi) = lum(f * L_i) * |cos| / L_r(x, wo)``."""
        integrand = luminance(rec.f * self.incoming_radiance(rec)) * rec.cos
        return np.maximum(integrand, 0.0) / self.normalization(rec)

    # --- PDF networks -----------------------------------------------------------

    def guide_gradients(self, rec: PathVertexRecords, p_hat: np.ndarray):
        """Loss and parameter gradients of ``-mean(p_hat / q * log p_theta(wi))`` for both networks."""
        cond = self.system.condition(rec.x, rec.wo, rec.normal, rec.roughness)
        eps1, eps2 = sphere_to_square(rec.wi)
        weights = batch_weights(p_hat / rec.q, self.system.config.weight_clip_quantile)
        loss, g1, g2 = square_log_density_gradients(self.system, cond, eps1, eps2, weights)
        # log p in solid angle differs by the constant -log(4 pi), which has no gradient
        return loss + float(np.mean(weights)) * math.log(4.0 * math.pi), g1, g2

    def train_guide(self, rec: PathVertexRecords, p_hat: np.ndarray | None = None) -> float:
        keep = rec.q >= MIN_Q
        dropped = int(np.sum(~keep))
        self.dropped_low_q += dropped
        if dropped:
            rec = rec.subset(keep)
            p_hat = None if p_hat is None else p_hat[keep]
        if len(rec) == 0:
            return 0.0
        if p_hat is None:
            p_hat = self.estimate_target(rec)
        sys_ = self.system
        loss, g1, g2 = self.guide_gradients(rec, p_hat)
        adam_step(sys_.marginal.params, g1, sys_.marginal_state, sys_.config.pdf_lr)
        adam_step(sys_.conditional.params, g2, sys_.conditional_state, sys_.config.pdf_lr)
        return loss

    # --- per-frame driver -------------------------------------------------------

    def run_training_frame(self, rec: PathVertexRecords, wave: int, rng: np.random.Generator) -> FrameStats:
        """Shuffle, split into equal mini-batches, and per batch update the cache then the guide."""
        if not self.schedule.is_training(wave):
            return FrameStats(trained=False)
        stats = FrameStats(trained=True, n_records=len(rec))
        nb = self.schedule.minibatches
        size = len(rec) // nb
        stats.batch_size = size
        if size == 0:
            return stats
        dropped_before = self.dropped_low_q
        order = rng.permutation(len(rec))
        train_pdf = wave > 0  # warm-up wave fits the cache only
        for b in range(nb):
            batch = rec.subset(order[b * size:(b + 1) * size])
            if self.system.config.cache != "off":
                stats.cache_losses.append(self.train_cache(batch))
            if train_pdf:
                stats.guide_losses.append(self.train_guide(batch))
        stats.dropped_low_q = self.dropped_low_q - dropped_before
        self.system.assert_finite()
        return stats
