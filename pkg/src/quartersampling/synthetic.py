"""Seeded synthetic sequences with analytically known motion.

All generators return integer-valued frames in [0, 255], so they survive a
PGM round trip unchanged.  Motion convention: ``frame[t](p) ==
frame[t-1](p + v)`` for a translation v, which is the vector the estimator
is expected to find for d = 1.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .frame_io import Frame


def texture(shape, sigma: float = 1.5, seed: int = 0, low: float = 16.0,
            high: float = 239.0) -> np.ndarray:
    """Gaussian-filtered white noise rescaled to [low, high] and rounded."""
    rng = np.random.default_rng(seed)
    x = gaussian_filter(rng.normal(size=shape), sigma, mode="wrap") if sigma > 0 \
        else rng.normal(size=shape)
    x = (x - x.min()) / max(x.max() - x.min(), 1e-12)
    return np.round(low + (high - low) * x)


def static_sequence(shape, length: int, sigma: float = 1.5, seed: int = 0) -> list[Frame]:
    base = texture(shape, sigma, seed)
    return [Frame(base, t=t) for t in range(length)]


def translation_sequence(shape, length: int, shift=(2, -3), sigma: float = 1.5,
                         seed: int = 0) -> list[Frame]:
    """Global translation: every frame moves by ``shift`` relative to its predecessor."""
    h, w = shape
    a, b = shift
    pad_r, pad_c = abs(a) * length, abs(b) * length
    canvas = texture((h + 2 * pad_r, w + 2 * pad_c), sigma, seed)
    frames = []
    for t in range(length):
        r0 = pad_r + t * a
        c0 = pad_c + t * b
        frames.append(Frame(canvas[r0:r0 + h, c0:c0 + w], t=t))
    return frames


def occlusion_pair(shape, shift=(2, -3), box=(24, 24, 16, 16), sigma: float = 1.5,
                   seed: int = 0, occluder: str = "flat", level: float = 0.0):
    """(past, current, occluded): a block pasted over ``past`` hides part of the scene.

    ``current`` is the translated scene; ``occluded`` marks current pixels
    whose true source p + shift lies under the pasted block.  ``box`` is
    (row, col, height, width) in past-frame coordinates.  The block is a
    flat patch at ``level`` (``occluder="flat"``) or an independent texture
    (``occluder="texture"``).
    """
    past, current = translation_sequence(shape, 2, shift, sigma, seed)
    r, c, bh, bw = box
    if occluder == "flat":
        patch = np.full((bh, bw), float(level))
    elif occluder == "texture":
        patch = texture((bh, bw), sigma, seed + 7919)
    else:
        raise ValueError(f"unknown occluder {occluder!r}")
    past_data = past.data.copy()
    past_data[r:r + bh, c:c + bw] = patch
    h, w = shape
    m, n = np.mgrid[0:h, 0:w]
    src_m, src_n = m + shift[0], n + shift[1]
    occluded = (src_m >= r) & (src_m < r + bh) & (src_n >= c) & (src_n < c + bw)
    return Frame(past_data, t=0), Frame(current.data, t=1), occluded


def moving_object_sequence(shape, length: int, velocity=(1, -2), object_size=(96, 96),
                           start=None, sigma: float = 1.5, seed: int = 0) -> list[Frame]:
    """A textured square translating over a static textured background."""
    h, w = shape
    oh, ow = object_size
    background = texture(shape, sigma, seed)
    obj = texture(object_size, sigma, seed + 104729, low=0.0, high=255.0)
    if start is None:
        start = ((h - oh) // 2 - velocity[0] * length // 2,
                 (w - ow) // 2 - velocity[1] * length // 2)
    frames = []
    for t in range(length):
        # the object content moves by -velocity so frame[t](p) = frame[t-1](p + v)
        r0 = start[0] - t * velocity[0]
        c0 = start[1] - t * velocity[1]
        data = background.copy()
        rs, re = max(r0, 0), min(r0 + oh, h)
        cs, ce = max(c0, 0), min(c0 + ow, w)
        if rs < re and cs < ce:
            data[rs:re, cs:ce] = obj[rs - r0:re - r0, cs - c0:ce - c0]
        frames.append(Frame(data, t=t))
    return frames


GENERATORS = {
    "static": static_sequence,
    "translation": translation_sequence,
    "moving_object": moving_object_sequence,
}
