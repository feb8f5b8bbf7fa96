from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np


class Film:
    """Add-only RGB accumulator with per-pixel sample counts and squared sums."""

    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self.sum = np.zeros((height, width, 3))
        self.sum_sq = np.zeros((height, width, 3))
        self.count = np.zeros((height, width), dtype=np.int64)

    def splat(self, px: np.ndarray, py: np.ndarray, rgb: np.ndarray):
        """Accumulate samples; repeated pixels within one call are reduced in input order."""
        flat = py * self.width + px
        n = self.width * self.height
        s = self.sum.reshape(n, 3)
        q = self.sum_sq.reshape(n, 3)
        for c in range(3):
            s[:, c] += np.bincount(flat, weights=rgb[:, c], minlength=n)
            q[:, c] += np.bincount(flat, weights=rgb[:, c] ** 2, minlength=n)
        self.count.reshape(n)[:] += np.bincount(flat, minlength=n)

    def mean(self) -> np.ndarray:
        return self.sum / np.maximum(self.count, 1)[..., None]

    def variance_of_mean(self) -> np.ndarray:
        """Per-pixel, per-channel sample variance divided by the count."""
        n = np.maximum(self.count, 1)[..., None]
        mu = self.sum / n
        var = np.maximum(self.sum_sq / n - mu * mu, 0.0) * n / np.maximum(n - 1, 1)
        return var / n

    def digest(self) -> str:
        return image_digest(self.mean())


def image_digest(img: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(img, dtype=np.float32).tobytes()).hexdigest()


def write_pfm(path, img: np.ndarray):
    """Little-endian colour PFM (scale -1); rows are stored bottom-to-top."""
    img = np.ascontiguousarray(np.asarray(img, dtype="<f4"))
    h, w = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(b"PF\n")
        fh.write(f"{w} {h}\n".encode())
        fh.write(b"-1.0\n")
        fh.write(img[::-1].tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.readline().strip()
        if header not in (b"PF", b"Pf"):
            raise ValueError(f"{path}: not a PFM file")
        channels = 3 if header == b"PF" else 1
        w, h = (int(x) for x in fh.readline().split())
        scale = float(fh.readline())
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(fh.read(), dtype=dtype, count=w * h * channels)
    shape = (h, w, 3) if channels == 3 else (h, w)
    return data.reshape(shape)[::-1].astype(np.float32)


def tonemap(img: np.ndarray, gamma: float = 2.2) -> np.ndarray:
    """Reinhard ``x / (1 + x)`` followed by gamma encoding, to 8-bit."""
    x = np.maximum(np.asarray(img, dtype=np.float64), 0.0)
    x = (x / (1.0 + x)) ** (1.0 / gamma)
    return np.clip(np.round(x * 255.0), 0, 255).astype(np.uint8)


def write_png(path, img: np.ndarray):
    from PIL import Image

    Image.fromarray(tonemap(img)).save(Path(path))
