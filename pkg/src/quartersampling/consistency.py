"""Consistency checks that accept or reject candidate motion vectors.

Reverse-matching checks score the past template at p + v against the
current measurements:

* ``rme``  full reverse search over u in [-S, S]^2, accept iff argmin u == -v;
* ``rmc``  candidates u = -v + delta, delta in [-S, S]^2, accept iff delta = 0
  ranks first;
* ``frmc`` like rmc with delta restricted to a sparse offset set per axis.

``nnc`` needs no matching: the field is median filtered per component and a
vector survives only if its filtered value is within an L1 distance of
``threshold`` of every filtered four-neighbour.  ``nnc_frmc`` runs FRMC only
on vectors that pass NNC.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from numba import njit, prange

from .motion import (ACCEPTED, CANDIDATE, REJECTED, MatchContext, MotionField, MotionParams,
                     precedes, reverse_cost_kernel)

CHECK_KINDS = ("none", "rme", "rmc", "frmc", "nnc", "nnc_frmc")
DEFAULT_FRMC_OFFSETS = (-7, -3, -1, 0, 1, 3, 7)


@dataclass(frozen=True)
class CheckMode:
    kind: str = "nnc_frmc"
    frmc_offsets: tuple = DEFAULT_FRMC_OFFSETS
    nnc_threshold: int = 1
    nnc_pairwise: bool = False

    def __post_init__(self):
        if self.kind not in CHECK_KINDS:
            raise ValueError(f"unknown check {self.kind!r}; choose from {', '.join(CHECK_KINDS)}")
        offsets = tuple(int(o) for o in self.frmc_offsets)
        if 0 not in offsets:
            raise ValueError("frmc offsets must contain 0")
        if len(set(offsets)) != len(offsets):
            raise ValueError("frmc offsets must be distinct")
        object.__setattr__(self, "frmc_offsets", offsets)
        if self.nnc_threshold < 0:
            raise ValueError("nnc threshold must be >= 0")

    def validate(self, params: MotionParams) -> None:
        S = params.search_range
        if any(abs(o) > S for o in self.frmc_offsets):
            raise ValueError(f"frmc offsets must lie within [-{S}, {S}]")


@dataclass
class CheckStats:
    """Running counters over one or more check invocations."""

    checked: int = 0
    accepted: int = 0
    rejected: int = 0
    evaluations: int = 0
    nnc_rejected: int = 0
    per_kind: dict = dc_field(default_factory=dict)

    def add(self, other: "CheckStats") -> None:
        self.checked += other.checked
        self.accepted += other.accepted
        self.rejected += other.rejected
        self.evaluations += other.evaluations
        self.nnc_rejected += other.nnc_rejected

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.checked if self.checked else float("nan")

    @property
    def evaluations_per_checked(self) -> float:
        return self.evaluations / self.checked if self.checked else float("nan")


# --------------------------------------------------------------------------
# kernels


@njit(parallel=True, cache=True)
def _reverse_check(past, f_sub, pf, ff, bits, counts, dm, dn, flat, em, en, alpha, beta,
                   d_rows, d_cols, around_back, r, min_support, msd, accept, evals):
    """Score u = base + delta for each entry; accept iff the best delta is the target.

    ``around_back``: base = -v and target delta = 0 (rmc/frmc); otherwise
    base = 0 and target delta = -v (rme).
    """
    for i in prange(em.size):
        pm = em[i]
        pn = en[i]
        va = alpha[pm, pn]
        vb = beta[pm, pn]
        am = pm + va
        an = pn + vb
        if around_back:
            base_a = -va
            base_b = -vb
            want_a = 0
            want_b = 0
        else:
            base_a = 0
            base_b = 0
            want_a = -va
            want_b = -vb
        best_c = np.inf
        best_a = 0
        best_b = 0
        found = False
        n_eval = 0
        H, W = past.shape
        # all centres am + u inside and template around am inside: tight loop
        fast = (r <= am < H - r and r <= an < W - r
                and 0 <= am + base_a + d_rows[0] and am + base_a + d_rows[-1] < H
                and 0 <= an + base_b + d_cols[0] and an + base_b + d_cols[-1] < W)
        a0 = am * W + an
        for x in range(d_rows.size):
            da = d_rows[x]
            for y in range(d_cols.size):
                db = d_cols[y]
                n_eval += 1
                if fast:
                    cm = am + base_a + da
                    cn = an + base_b + db
                    cnt = counts[cm, cn]
                    if cnt < min_support:
                        continue
                    c0 = cm * W + cn
                    s = 0.0
                    if msd:
                        for j in range(cnt):
                            o = flat[cm, cn, j]
                            d = pf[a0 + o] - ff[c0 + o]
                            s += d * d
                    else:
                        for j in range(cnt):
                            o = flat[cm, cn, j]
                            s += abs(pf[a0 + o] - ff[c0 + o])
                    c = s / cnt
                else:
                    c = reverse_cost_kernel(past, f_sub, pf, ff, bits, counts, dm, dn, flat,
                                            am, an, base_a + da, base_b + db, r, min_support,
                                            msd)
                    if c == np.inf:
                        continue
                if not found or precedes(c, da, db, best_c, best_a, best_b):
                    best_c = c
                    best_a = da
                    best_b = db
                    found = True
        evals[i] = n_eval
        accept[i] = found and best_a == want_a and best_b == want_b


@njit(cache=True)
def _lower_median(buf, n):
    for i in range(1, n):
        x = buf[i]
        j = i - 1
        while j >= 0 and buf[j] > x:
            buf[j + 1] = buf[j]
            j -= 1
        buf[j + 1] = x
    return buf[(n - 1) // 2]


@njit(cache=True)
def _median_filter(valid, alpha, beta, fa, fb):
    H, W = valid.shape
    buf_a = np.empty(9, dtype=np.int64)
    buf_b = np.empty(9, dtype=np.int64)
    for m in range(H):
        for n in range(W):
            if not valid[m, n]:
                continue
            k = 0
            for x in range(max(m - 1, 0), min(m + 2, H)):
                for y in range(max(n - 1, 0), min(n + 2, W)):
                    if valid[x, y]:
                        buf_a[k] = alpha[x, y]
                        buf_b[k] = beta[x, y]
                        k += 1
            fa[m, n] = _lower_median(buf_a, k)
            fb[m, n] = _lower_median(buf_b, k)


@njit(cache=True)
def _nnc_verdict(valid, fa, fb, threshold, pairwise, out):
    H, W = valid.shape
    nb_m = np.empty(4, dtype=np.int64)
    nb_n = np.empty(4, dtype=np.int64)
    step_m = np.array([-1, 1, 0, 0])
    step_n = np.array([0, 0, -1, 1])
    for m in range(H):
        for n in range(W):
            if not valid[m, n]:
                continue
            k = 0
            for s in range(4):
                x = m + step_m[s]
                y = n + step_n[s]
                if 0 <= x < H and 0 <= y < W and valid[x, y]:
                    nb_m[k] = x
                    nb_n[k] = y
                    k += 1
            ok = True
            if pairwise:
                for i in range(k):
                    for j in range(i + 1, k):
                        d = (abs(fa[nb_m[i], nb_n[i]] - fa[nb_m[j], nb_n[j]])
                             + abs(fb[nb_m[i], nb_n[i]] - fb[nb_m[j], nb_n[j]]))
                        if d > threshold:
                            ok = False
            else:
                for i in range(k):
                    d = abs(fa[m, n] - fa[nb_m[i], nb_n[i]]) + abs(fb[m, n] - fb[nb_m[i], nb_n[i]])
                    if d > threshold:
                        ok = False
            out[m, n] = ok


# --------------------------------------------------------------------------
# public API


@dataclass(frozen=True)
class FilteredField:
    """Component-wise 3x3 lower-median of the valid vectors (``defined`` marks support)."""

    alpha: np.ndarray
    beta: np.ndarray
    defined: np.ndarray


def median_filter_field(field: MotionField) -> FilteredField:
    fa = np.zeros(field.shape, dtype=np.int64)
    fb = np.zeros(field.shape, dtype=np.int64)
    valid = np.ascontiguousarray(field.valid)
    _median_filter(valid, np.ascontiguousarray(field.alpha, dtype=np.int64),
                   np.ascontiguousarray(field.beta, dtype=np.int64), fa, fb)
    return FilteredField(fa, fb, valid.copy())


def nnc_verdict(field: MotionField, threshold: int = 1, pairwise: bool = False) -> np.ndarray:
    """Boolean map: True where a valid vector passes the neighbour test."""
    filt = median_filter_field(field)
    out = np.zeros(field.shape, dtype=bool)
    _nnc_verdict(filt.defined, filt.alpha, filt.beta, threshold, pairwise, out)
    return out & field.valid


def _decide(field: MotionField, decided: np.ndarray, verdict: np.ndarray) -> MotionField:
    status = field.status.copy()
    status[decided & verdict] = ACCEPTED
    status[decided & ~verdict] = REJECTED
    return field.with_status(status)


def _run_reverse(field, ctx: MatchContext, which: np.ndarray, d_rows, d_cols, around_back):
    em, en = np.nonzero(which)
    accept = np.zeros(em.size, dtype=np.bool_)
    evals = np.zeros(em.size, dtype=np.int64)
    p = ctx.params
    _reverse_check(ctx.past, ctx.f_sub, ctx.pf, ctx.ff, ctx.bits, ctx.counts, ctx.dm, ctx.dn, ctx.flat,
                   em.astype(np.int64), en.astype(np.int64),
                   np.ascontiguousarray(field.alpha, dtype=np.int64),
                   np.ascontiguousarray(field.beta, dtype=np.int64),
                   np.asarray(d_rows, dtype=np.int64), np.asarray(d_cols, dtype=np.int64),
                   around_back, p.template_radius, p.min_support, ctx.msd, accept, evals)
    verdict = np.zeros(field.shape, dtype=bool)
    verdict[em, en] = accept
    return verdict, int(evals.sum())


def _finish(field, new, which, evaluations, stats, nnc_rejected=0):
    if stats is not None:
        accepted = int((new.accepted & which).sum())
        stats.add(CheckStats(checked=int(which.sum()), accepted=accepted,
                             rejected=int(which.sum()) - accepted,
                             evaluations=evaluations, nnc_rejected=nnc_rejected))
    return new


def _context(current, past, params, context):
    return context or MatchContext(current, past, params or MotionParams())


def check_none(field: MotionField, stats: CheckStats | None = None) -> MotionField:
    which = field.pending
    return _finish(field, _decide(field, which, which), which, 0, stats)


def check_rme(field, current=None, past=None, params=None, *, context=None, stats=None):
    ctx = _context(current, past, params, context)
    S = ctx.params.search_range
    grid = np.arange(-S, S + 1)
    which = field.pending
    verdict, n = _run_reverse(field, ctx, which, grid, grid, False)
    return _finish(field, _decide(field, which, verdict), which, n, stats)


def check_rmc(field, current=None, past=None, params=None, *, context=None, stats=None):
    ctx = _context(current, past, params, context)
    S = ctx.params.search_range
    grid = np.arange(-S, S + 1)
    which = field.pending
    verdict, n = _run_reverse(field, ctx, which, grid, grid, True)
    return _finish(field, _decide(field, which, verdict), which, n, stats)


def check_frmc(field, current=None, past=None, params=None, offsets=DEFAULT_FRMC_OFFSETS,
               *, context=None, stats=None):
    ctx = _context(current, past, params, context)
    offsets = np.asarray(sorted(offsets), dtype=np.int64)
    which = field.pending
    verdict, n = _run_reverse(field, ctx, which, offsets, offsets, True)
    return _finish(field, _decide(field, which, verdict), which, n, stats)


def check_nnc(field: MotionField, threshold: int = 1, pairwise: bool = False,
              *, stats=None) -> MotionField:
    which = field.pending
    verdict = nnc_verdict(field, threshold, pairwise)
    new = _decide(field, which, verdict)
    return _finish(field, new, which, 0, stats, nnc_rejected=int((which & ~verdict).sum()))


def check_nnc_frmc(field, current=None, past=None, params=None,
                   offsets=DEFAULT_FRMC_OFFSETS, threshold: int = 1, pairwise: bool = False,
                   *, context=None, stats=None):
    """NNC first; FRMC only for the vectors NNC lets through."""
    ctx = _context(current, past, params, context)
    which = field.pending
    passed = nnc_verdict(field, threshold, pairwise) & which
    offsets = np.asarray(sorted(offsets), dtype=np.int64)
    verdict, n = _run_reverse(field, ctx, passed, offsets, offsets, True)
    new = _decide(field, which, verdict & passed)
    return _finish(field, new, which, n, stats, nnc_rejected=int((which & ~passed).sum()))


def apply_check(mode: CheckMode, field: MotionField, ctx: MatchContext,
                stats: CheckStats | None = None) -> MotionField:
    kind = mode.kind
    if kind == "none":
        return check_none(field, stats=stats)
    if kind == "rme":
        return check_rme(field, context=ctx, stats=stats)
    if kind == "rmc":
        return check_rmc(field, context=ctx, stats=stats)
    if kind == "frmc":
        return check_frmc(field, offsets=mode.frmc_offsets, context=ctx, stats=stats)
    if kind == "nnc":
        return check_nnc(field, mode.nnc_threshold, mode.nnc_pairwise, stats=stats)
    return check_nnc_frmc(field, offsets=mode.frmc_offsets, threshold=mode.nnc_threshold,
                          pairwise=mode.nnc_pairwise, context=ctx, stats=stats)
