"""Pixel-wise template matching between a sampled frame and a dense past frame.

For a missing pixel p of the current frame the template consists of the
measured pixels in the (2r+1)^2 window around p.  Every integer vector v in
[-S, S]^2 is scored by the mean absolute difference between those
measurements and the past frame at q + v; the lowest cost wins, ties are
broken by the total order (cost, |alpha| + |beta|, alpha, beta).

Sums run over window positions in row-major order, which keeps results
bit-identical to a literal loop over the definition.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np
from numba import njit, prange

from .errors import DimensionError
from .frame_io import Frame, SampledFrame

CANDIDATE, ACCEPTED, REJECTED = 0, 1, 2
STATUS_NAMES = {CANDIDATE: "candidate", ACCEPTED: "accepted", REJECTED: "rejected"}


@dataclass(frozen=True)
class MotionParams:
    search_range: int = 9
    template_radius: int = 4
    min_support: int = 8
    cost: str = "mad"

    def __post_init__(self):
        if self.search_range < 1 or self.template_radius < 1 or self.min_support < 1:
            raise ValueError("search_range, template_radius and min_support must be >= 1")
        if self.cost not in ("mad", "msd"):
            raise ValueError(f"unknown cost {self.cost!r} (mad or msd)")


@dataclass(frozen=True)
class MotionField:
    """Dense per-pixel motion vectors towards the frame ``ref_offset`` steps back.

    ``alpha`` is the row and ``beta`` the column component; the vector of
    pixel p points to p + (alpha, beta) in the past frame.
    """

    valid: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    cost: np.ndarray
    status: np.ndarray
    ref_offset: int = 1

    @property
    def shape(self) -> tuple[int, int]:
        return self.valid.shape

    @property
    def accepted(self) -> np.ndarray:
        return self.valid & (self.status == ACCEPTED)

    @property
    def rejected(self) -> np.ndarray:
        return self.valid & (self.status == REJECTED)

    @property
    def pending(self) -> np.ndarray:
        return self.valid & (self.status == CANDIDATE)

    def with_status(self, status: np.ndarray) -> "MotionField":
        return replace(self, status=np.asarray(status, dtype=np.int8))

    def accept_all(self) -> "MotionField":
        status = np.where(self.valid, ACCEPTED, self.status).astype(np.int8)
        return self.with_status(status)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["m", "n", "d", "alpha", "beta", "cost", "status"])
            for m, n in zip(*np.nonzero(self.valid)):
                writer.writerow([m, n, self.ref_offset, self.alpha[m, n], self.beta[m, n],
                                 repr(float(self.cost[m, n])),
                                 STATUS_NAMES[int(self.status[m, n])]])


def empty_field(shape, ref_offset: int = 1) -> MotionField:
    return MotionField(
        valid=np.zeros(shape, dtype=bool),
        alpha=np.zeros(shape, dtype=np.int64),
        beta=np.zeros(shape, dtype=np.int64),
        cost=np.full(shape, np.inf),
        status=np.zeros(shape, dtype=np.int8),
        ref_offset=ref_offset,
    )


# --------------------------------------------------------------------------
# numba kernels


@njit(cache=True)
def window_lists(bits, r):
    """Row-major offsets of measured pixels inside each pixel's window."""
    H, W = bits.shape
    K = (2 * r + 1) * (2 * r + 1)
    counts = np.zeros((H, W), dtype=np.int64)
    dm = np.zeros((H, W, K), dtype=np.int8)
    dn = np.zeros((H, W, K), dtype=np.int8)
    flat = np.zeros((H, W, K), dtype=np.int32)
    for m in range(H):
        for n in range(W):
            c = 0
            for a in range(-r, r + 1):
                qm = m + a
                if qm < 0 or qm >= H:
                    continue
                for b in range(-r, r + 1):
                    qn = n + b
                    if qn < 0 or qn >= W:
                        continue
                    if bits[qm, qn] != 0:
                        dm[m, n, c] = a
                        dn[m, n, c] = b
                        flat[m, n, c] = a * W + b
                        c += 1
            counts[m, n] = c
    return counts, dm, dn, flat


@njit(cache=True, inline="always")
def precedes(c1, a1, b1, c2, a2, b2):
    """True if (c1, a1, b1) ranks before (c2, a2, b2) in the tie-break order."""
    if c1 < c2:
        return True
    if c1 > c2:
        return False
    l1 = abs(a1) + abs(b1)
    l2 = abs(a2) + abs(b2)
    if l1 != l2:
        return l1 < l2
    if a1 != a2:
        return a1 < a2
    return b1 < b2


@njit(cache=True)
def _match_target(f_sub, past, counts, dm, dn, flat, pm, pn, S, r, min_support, msd):
    H, W = past.shape
    best_c = np.inf
    best_a = 0
    best_b = 0
    found = False
    cnt = counts[pm, pn]
    if cnt < min_support:
        return found, best_a, best_b, best_c
    R = r + S
    interior = R <= pm < H - R and R <= pn < W - R
    if interior:
        f_flat = f_sub.reshape(H * W)
        p_flat = past.reshape(H * W)
        base = pm * W + pn
        idx = np.empty(cnt, dtype=np.int64)
        tmpl = np.empty(cnt)
        for i in range(cnt):
            idx[i] = base + flat[pm, pn, i]
            tmpl[i] = f_flat[idx[i]]
    for a in range(-S, S + 1):
        for b in range(-S, S + 1):
            s = 0.0
            k = 0
            if interior:
                off = a * W + b
                for i in range(cnt):
                    d = tmpl[i] - p_flat[idx[i] + off]
                    if msd:
                        s += d * d
                    else:
                        s += abs(d)
                k = cnt
            else:
                for i in range(cnt):
                    qm = pm + dm[pm, pn, i]
                    qn = pn + dn[pm, pn, i]
                    tm = qm + a
                    tn = qn + b
                    if tm < 0 or tm >= H or tn < 0 or tn >= W:
                        continue
                    d = f_sub[qm, qn] - past[tm, tn]
                    if msd:
                        s += d * d
                    else:
                        s += abs(d)
                    k += 1
            if k < min_support:
                continue
            c = s / k
            if not found or precedes(c, a, b, best_c, best_a, best_b):
                best_c = c
                best_a = a
                best_b = b
                found = True
    return found, best_a, best_b, best_c


@njit(parallel=True, cache=True)
def _estimate(f_sub, past, counts, dm, dn, flat, tm, tn, S, r, min_support, msd,
              valid, alpha, beta, cost):
    for i in prange(tm.size):
        ok, a, b, c = _match_target(f_sub, past, counts, dm, dn, flat, tm[i], tn[i], S,
                                    r, min_support, msd)
        if ok:
            valid[tm[i], tn[i]] = True
            alpha[tm[i], tn[i]] = a
            beta[tm[i], tn[i]] = b
            cost[tm[i], tn[i]] = c


@njit(cache=True, inline="always")
def reverse_cost_kernel(past, f_sub, pf, ff, bits, counts, dm, dn, flat, am, an, vm, vn,
                        r, min_support, msd):
    """Cost of the past template at (am, an) against current measurements at +v.

    ``pf``/``ff`` are flat views of the C-contiguous ``past``/``f_sub``.
    """
    H, W = past.shape
    cm = am + vm
    cn = an + vn
    if r <= am < H - r and r <= an < W - r and 0 <= cm < H and 0 <= cn < W:
        # whole template inside the frame: no per-pixel bounds checks
        cnt = counts[cm, cn]
        if cnt < min_support:
            return np.inf
        a0 = am * W + an
        c0 = cm * W + cn
        s = 0.0
        if msd:
            for i in range(cnt):
                o = flat[cm, cn, i]
                d = pf[a0 + o] - ff[c0 + o]
                s += d * d
        else:
            for i in range(cnt):
                o = flat[cm, cn, i]
                s += abs(pf[a0 + o] - ff[c0 + o])
        return s / cnt
    return _reverse_cost_border(past, f_sub, bits, counts, dm, dn, am, an, vm, vn, r,
                                min_support, msd)


@njit(cache=True)
def _reverse_cost_border(past, f_sub, bits, counts, dm, dn, am, an, vm, vn, r,
                         min_support, msd):
    H, W = past.shape
    cm = am + vm
    cn = an + vn
    s = 0.0
    k = 0
    if 0 <= cm < H and 0 <= cn < W:
        # measured q + v around c, visited in row-major order of q
        for i in range(counts[cm, cn]):
            qm = am + dm[cm, cn, i]
            qn = an + dn[cm, cn, i]
            if qm < 0 or qm >= H or qn < 0 or qn >= W:
                continue
            d = past[qm, qn] - f_sub[qm + vm, qn + vn]
            if msd:
                s += d * d
            else:
                s += abs(d)
            k += 1
    else:
        for x in range(-r, r + 1):
            qm = am + x
            if qm < 0 or qm >= H or qm + vm < 0 or qm + vm >= H:
                continue
            for y in range(-r, r + 1):
                qn = an + y
                if qn < 0 or qn >= W or qn + vn < 0 or qn + vn >= W:
                    continue
                if bits[qm + vm, qn + vn] == 0:
                    continue
                d = past[qm, qn] - f_sub[qm + vm, qn + vn]
                if msd:
                    s += d * d
                else:
                    s += abs(d)
                k += 1
    if k < min_support:
        return np.inf
    return s / k


# --------------------------------------------------------------------------
# public API


class MatchContext:
    """Arrays shared by forward estimation and reverse checks for one frame pair."""

    def __init__(self, current: SampledFrame, past: Frame, params: MotionParams):
        if current.shape != past.shape:
            raise DimensionError(f"current {current.shape} and past {past.shape} differ")
        self.params = params
        self.f_sub = np.ascontiguousarray(current.values)
        self.bits = np.ascontiguousarray(current.bits)
        self.past = np.ascontiguousarray(past.data)
        self.counts, self.dm, self.dn, self.flat = window_lists(self.bits,
                                                                params.template_radius)
        self.pf = self.past.reshape(-1)
        self.ff = self.f_sub.reshape(-1)
        self.msd = params.cost == "msd"

    def reverse_cost(self, at, v) -> float:
        return reverse_cost_kernel(self.past, self.f_sub, self.pf, self.ff, self.bits,
                                   self.counts, self.dm,
                                   self.dn, self.flat, at[0], at[1], v[0], v[1],
                                   self.params.template_radius, self.params.min_support,
                                   self.msd)


def estimate(current: SampledFrame, past: Frame, params: MotionParams | None = None,
             targets=None, ref_offset: int = 1, context: MatchContext | None = None) -> MotionField:
    """Motion field for ``targets`` (default: every unmeasured pixel)."""
    params = params or MotionParams()
    ctx = context or MatchContext(current, past, params)
    missing = ctx.bits == 0
    if targets is None:
        targets = missing
    else:
        targets = np.asarray(targets, dtype=bool)
        if targets.shape != missing.shape:
            raise DimensionError("targets mask does not match frame size")
        if np.any(targets & ~missing):
            raise ValueError("targets must be unmeasured positions of the current frame")
    tm, tn = np.nonzero(targets)
    field = empty_field(current.shape, ref_offset)
    _estimate(ctx.f_sub, ctx.past, ctx.counts, ctx.dm, ctx.dn, ctx.flat, tm.astype(np.int64),
              tn.astype(np.int64), params.search_range, params.template_radius,
              params.min_support, ctx.msd,
              field.valid, field.alpha, field.beta, field.cost)
    return field


def reverse_cost(past: Frame, current: SampledFrame, at, v, params: MotionParams | None = None) -> float:
    """Match the template of ``past`` around ``at`` against current measurements at +v.

    Returns ``inf`` when fewer than ``min_support`` window pixels qualify.
    """
    params = params or MotionParams()
    ctx = MatchContext(current, past, params)
    H, W = past.shape
    if not (0 <= at[0] < H and 0 <= at[1] < W):
        raise ValueError(f"position {at} outside the frame")
    return ctx.reverse_cost(at, v)
