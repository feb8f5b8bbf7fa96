"""Trimmed relative MSE and the per-experiment report."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

EPS_METRIC = 1e-4
TRIM_FRACTION = 0.001


def relmse_map(image: np.ndarray, reference: np.ndarray, eps: float = EPS_METRIC) -> np.ndarray:
    """Per-pixel ``mean_c (I - R)^2 / (mean_c(R)^2 + eps)``."""
    image = np.asarray(image, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if image.shape != reference.shape:
        raise ValueError(f"dimension mismatch: {image.shape} vs {reference.shape}")
    if image.ndim == 2:
        image, reference = image[..., None], reference[..., None]
    num = np.mean((image - reference) ** 2, axis=-1)
    den = np.mean(reference, axis=-1) ** 2 + eps
    return num / den


def relmse(image: np.ndarray, reference: np.ndarray, trim: float = TRIM_FRACTION, eps: float = EPS_METRIC) -> float:
    """Mean per-pixel relative squared error after dropping the ``ceil(trim * pixels)`` largest."""
    err = relmse_map(image, reference, eps).ravel()
    err = np.where(np.isnan(err), np.inf, err)
    drop = math.ceil(trim * err.size - 1e-9) if trim > 0 else 0
    if drop >= err.size:
        raise ValueError("trim removes every pixel")
    kept = np.sort(err)[: err.size - drop]
    return float(np.mean(kept))


@dataclass
class MetricReport:
    scene: str
    mode: str
    resolution: str
    cache: str
    spp: int
    seeds: list
    relmse: list = field(default_factory=list)
    convergence: dict = field(default_factory=dict)  # spp -> list of per-run values
    reference_hash: str | None = None
    film_digests: list = field(default_factory=list)
    eps_metric: float = EPS_METRIC
    trim: float = TRIM_FRACTION

    @property
    def mean_relmse(self) -> float | None:
        return float(np.mean(self.relmse)) if self.relmse else None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mean_relmse"] = self.mean_relmse
        d["convergence"] = {str(k): v for k, v in sorted(self.convergence.items())}
        return d
