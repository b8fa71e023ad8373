"""Frame quality metrics evaluated on the interior of the frame.

A band of ``border`` pixels along each edge is excluded from both PSNR and
SSIM.  SSIM windows are only placed where they lie completely inside the
interior, so nothing outside it can influence the result.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .errors import ConfigError, DimensionError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalConfig:
    border: int = 40
    peak: float = 255.0
    ssim_window: int = 11
    ssim_sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03

    def __post_init__(self):
        if self.border < 0:
            raise ConfigError("border must be >= 0")
        if self.ssim_window < 1 or self.ssim_window % 2 == 0:
            raise ConfigError("ssim_window must be a positive odd number")
        if self.peak <= 0 or self.ssim_sigma <= 0:
            raise ConfigError("peak and ssim_sigma must be positive")

    def interior(self, shape) -> tuple[slice, slice]:
        h, w = shape
        if 2 * self.border >= min(h, w):
            raise ConfigError(f"border {self.border} leaves no interior in a {w}x{h} frame")
        b = self.border
        return slice(b, h - b), slice(b, w - b)


def _pair(ref, test, cfg: EvalConfig):
    a = np.asarray(getattr(ref, "data", ref), dtype=np.float64)
    b = np.asarray(getattr(test, "data", test), dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"frames differ in size: {a.shape} vs {b.shape}")
    rows, cols = cfg.interior(a.shape)
    return a[rows, cols], b[rows, cols]


def mse(ref, test, cfg: EvalConfig | None = None) -> float:
    cfg = cfg or EvalConfig()
    a, b = _pair(ref, test, cfg)
    d = a - b
    return float(np.mean(d * d))


def psnr(ref, test, cfg: EvalConfig | None = None) -> float:
    """PSNR in dB over the interior; ``inf`` for identical interiors."""
    cfg = cfg or EvalConfig()
    e = mse(ref, test, cfg)
    if e == 0.0:
        return math.inf
    return 10.0 * math.log10(cfg.peak * cfg.peak / e)


def gaussian_window_1d(size: int, sigma: float) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def ssim_map(ref, test, cfg: EvalConfig | None = None) -> np.ndarray:
    """Local SSIM for every window position fully inside the interior."""
    cfg = cfg or EvalConfig()
    a, b = _pair(ref, test, cfg)
    size = cfg.ssim_window
    if min(a.shape) < size:
        raise ConfigError(f"interior {a.shape} smaller than the {size}x{size} SSIM window")
    g = gaussian_window_1d(size, cfg.ssim_sigma)
    half = size // 2

    def blur(x):
        y = correlate1d(x, g, axis=0, mode="constant")
        y = correlate1d(y, g, axis=1, mode="constant")
        return y[half:x.shape[0] - half, half:x.shape[1] - half]

    mu_a, mu_b = blur(a), blur(b)
    # centred second moments keep cancellation small for 8-bit ranges
    da = a - a.mean()
    db = b - b.mean()
    ca, cb = mu_a - a.mean(), mu_b - b.mean()
    var_a = blur(da * da) - ca * ca
    var_b = blur(db * db) - cb * cb
    cov = blur(da * db) - ca * cb
    c1 = (cfg.k1 * cfg.peak) ** 2
    c2 = (cfg.k2 * cfg.peak) ** 2
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return num / den


def ssim(ref, test, cfg: EvalConfig | None = None) -> float:
    """Mean SSIM over the interior."""
    return float(np.mean(ssim_map(ref, test, cfg)))


@dataclass(frozen=True)
class SequenceSummary:
    mean_psnr: float
    mean_ssim: float
    frames: int
    inf_excluded: int


def sequence_summary(per_frame) -> SequenceSummary:
    """Average (psnr, ssim) pairs; infinite PSNR values are left out of the mean."""
    per_frame = list(per_frame)
    if not per_frame:
        raise ValueError("sequence_summary needs at least one frame")
    finite = [p for p, _ in per_frame if math.isfinite(p)]
    skipped = len(per_frame) - len(finite)
    if skipped:
        log.warning("%d frame(s) with infinite PSNR excluded from the average", skipped)
    mean_psnr = float(np.mean(finite)) if finite else math.inf
    mean_ssim = float(np.mean([s for _, s in per_frame]))
    return SequenceSummary(mean_psnr, mean_ssim, len(per_frame), skipped)
