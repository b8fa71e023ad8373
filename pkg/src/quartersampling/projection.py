"""Motion-compensated projection of past measurements into the current frame."""

from __future__ import annotations

import numpy as np

from .errors import DimensionError
from .frame_io import SampledFrame


class ProjectionBuffer:
    """Per-pixel running sum and count of projected measurements."""

    def __init__(self, height: int, width: int):
        self.sum = np.zeros((height, width))
        self.count = np.zeros((height, width), dtype=np.int64)

    @property
    def shape(self) -> tuple[int, int]:
        return self.sum.shape

    def overlay(self) -> tuple[np.ndarray, np.ndarray]:
        """(values, mask): mean of contributions where count > 0, else 0."""
        mask = self.count > 0
        values = np.zeros_like(self.sum)
        values[mask] = self.sum[mask] / self.count[mask]
        return values, mask

    def merge(self, other: "ProjectionBuffer") -> "ProjectionBuffer":
        if other.shape != self.shape:
            raise DimensionError("cannot merge projection buffers of different size")
        out = ProjectionBuffer(*self.shape)
        out.sum = self.sum + other.sum
        out.count = self.count + other.count
        return out

    def copy(self) -> "ProjectionBuffer":
        out = ProjectionBuffer(*self.shape)
        out.sum = self.sum.copy()
        out.count = self.count.copy()
        return out


def to_sampled_overlay(buffer: ProjectionBuffer):
    return buffer.overlay()


def project(field, past_sampled: SampledFrame, buffer: ProjectionBuffer) -> ProjectionBuffer:
    """Add past measurements along accepted vectors of ``field`` to ``buffer``.

    Only raw measurements of the past frame (mask = 1) are used.  The input
    buffer is left untouched; an updated copy is returned.
    """
    if field.shape != past_sampled.shape or buffer.shape != past_sampled.shape:
        raise DimensionError("field, past frame and buffer must share one size")
    H, W = field.shape
    m, n = np.nonzero(field.accepted)
    qm = m + field.alpha[m, n]
    qn = n + field.beta[m, n]
    inside = (qm >= 0) & (qm < H) & (qn >= 0) & (qn < W)
    m, n, qm, qn = m[inside], n[inside], qm[inside], qn[inside]
    hit = past_sampled.bits[qm, qn] == 1
    m, n, qm, qn = m[hit], n[hit], qm[hit], qn[hit]

    out = buffer.copy()
    # each target pixel receives at most one contribution per field
    out.sum[m, n] += past_sampled.values[qm, qn]
    out.count[m, n] += 1
    return out
