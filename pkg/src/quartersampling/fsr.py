"""Frequency selective reconstruction (FSR) of sparsely sampled frames.

The frame is cut into B x B blocks.  Each block is modelled inside an
L x L processing area (block plus a D-pixel margin) as a sparse sum of 2-D
DFT basis functions, chosen greedily:

* the weighted residual spectrum ``R = DFT(w * (f - g))`` is kept in the
  Fourier domain; adding ``c * phi_u`` plus its conjugate changes it by
  ``c W(k - u) + conj(c) W(k + u)`` with ``W = DFT(w)``, so no FFT is needed
  inside the loop;
* the basis function maximising ``w_f(u) |R(u)|^2`` is picked, its
  coefficient is moved by ``gamma * R(u) / W(0, 0)``.

Residuals of real signals stay Hermitian, so only rows ``0 .. L//2`` of the
spectrum are tracked.  All arithmetic runs in numba kernels with a fixed
operation order, so every block result is independent of scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from numba import njit, prange

from .errors import DimensionError
from .frame_io import Frame, SampledFrame


@dataclass(frozen=True)
class FsrParams:
    block_size: int = 4
    border: int = 14
    iterations: int = 100
    rho: float = 0.7
    rho_f: float = 0.975
    gamma: float = 0.5
    # extra reliability factor for projected-only pixels
    kappa: float = 1.0

    def __post_init__(self):
        if self.block_size < 1 or self.border < 0:
            raise ValueError("block_size must be >= 1 and border >= 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if not 0.0 < self.rho_f <= 1.0:
            raise ValueError("rho_f must lie in (0, 1]")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0.0 <= self.kappa <= 1.0:
            raise ValueError("kappa must lie in [0, 1]")

    @property
    def area(self) -> int:
        return self.block_size + 2 * self.border


@dataclass(frozen=True)
class SupportArea:
    """Values and reliability weights of one L x L processing area."""

    values: np.ndarray
    weight_mask: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        w = np.asarray(self.weight_mask, dtype=np.float64)
        if v.shape != w.shape or v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise DimensionError("support values and weights must be equal square grids")
        if np.any(w < 0) or np.any(w > 1):
            raise ValueError("weights must lie in [0, 1]")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weight_mask", w)


def twiddle_tables(L: int) -> tuple[np.ndarray, np.ndarray]:
    """cos/sin of 2*pi*j/L with exact mirror symmetry ``sin[L-j] == -sin[j]``."""
    cos_t = np.empty(L)
    sin_t = np.empty(L)
    for j in range(L // 2 + 1):
        cos_t[j] = math.cos(2.0 * math.pi * j / L)
        sin_t[j] = math.sin(2.0 * math.pi * j / L)
    sin_t[0] = 0.0
    if L % 2 == 0:
        sin_t[L // 2] = 0.0
        cos_t[L // 2] = -1.0
    for j in range(1, (L + 1) // 2):
        cos_t[L - j] = cos_t[j]
        sin_t[L - j] = -sin_t[j]
    return cos_t, sin_t


def spatial_weight(params: FsrParams) -> np.ndarray:
    """rho ** (distance to the area centre) on the L x L grid."""
    L = params.area
    c = (L - 1) / 2.0
    m = np.arange(L, dtype=np.float64)[:, None] - c
    n = np.arange(L, dtype=np.float64)[None, :] - c
    return params.rho ** np.sqrt(m * m + n * n)


def frequency_weight(params: FsrParams) -> np.ndarray:
    """Low-frequency prior rho_f ** |centred frequency|."""
    L = params.area
    k = np.arange(L)
    k = np.where(k <= L // 2, k, k - L).astype(np.float64)
    return params.rho_f ** np.sqrt(k[:, None] ** 2 + k[None, :] ** 2)


def make_weight(mask_block, proj_block, params: FsrParams) -> np.ndarray:
    mask_block = np.asarray(mask_block).astype(bool)
    proj_only = np.asarray(proj_block).astype(bool) & ~mask_block
    indicator = mask_block + params.kappa * proj_only
    return spatial_weight(params) * indicator


# --------------------------------------------------------------------------
# numba kernels


@njit(cache=True)
def _dft_rows(a, cos_t, sin_t, rows, out_re, out_im):
    """out[k, l] = sum a[m, n] exp(-2 pi i (k m + l n) / L) for k < rows."""
    L = a.shape[0]
    e_re = np.empty((L, L))
    e_im = np.empty((L, L))
    for k in range(L):
        for m in range(L):
            j = (k * m) % L
            e_re[k, m] = cos_t[j]
            e_im[k, m] = -sin_t[j]
    t_re = np.empty((rows, L))
    t_im = np.empty((rows, L))
    for k in range(rows):
        for n in range(L):
            t_re[k, n] = 0.0
            t_im[k, n] = 0.0
        for m in range(L):
            c = e_re[k, m]
            s = e_im[k, m]
            for n in range(L):
                t_re[k, n] += a[m, n] * c
                t_im[k, n] += a[m, n] * s
    for k in range(rows):
        for l in range(L):
            sr = 0.0
            si = 0.0
            for n in range(L):
                c = e_re[l, n]
                s = e_im[l, n]
                sr += t_re[k, n] * c - t_im[k, n] * s
                si += t_re[k, n] * s + t_im[k, n] * c
            out_re[k, l] = sr
            out_im[k, l] = si


@njit(cache=True, inline="always")
def _shift_update(f_re, f_im, x_re, x_im, r0, a0, b0, n, dc_re, dc_im):
    for l in range(n):
        xa_re = x_re[a0 + l]
        xa_im = x_im[a0 + l]
        xb_re = x_re[b0 + l]
        xb_im = x_im[b0 + l]
        f_re[r0 + l] -= (dc_re * xa_re - dc_im * xa_im) + (dc_re * xb_re + dc_im * xb_im)
        f_im[r0 + l] -= (dc_re * xa_im + dc_im * xa_re) + (dc_re * xb_im - dc_im * xb_re)


@njit(cache=True, inline="always")
def _shift_update_real(f_re, f_im, x_re, x_im, r0, a0, n, dc_re):
    for l in range(n):
        f_re[r0 + l] -= dc_re * x_re[a0 + l]
        f_im[r0 + l] -= dc_re * x_im[a0 + l]


@njit(cache=True, inline="always")
def _weighted_argmax(f_re, f_im, wf):
    """First index of the maximum of wf * |f|^2 (lowest index wins ties)."""
    best = -1.0
    pos = 0
    for i in range(f_re.size):
        v = wf[i] * (f_re[i] * f_re[i] + f_im[i] * f_im[i])
        if v > best:
            best = v
            pos = i
    return pos


@njit(cache=True)
def _fit_area(values, weights, wf, iterations, gamma, cos_t, sin_t,
              sel_k, sel_l, sel_re, sel_im):
    """Greedy sparse fit on one area; fills the selection arrays.

    Returns the number of stored selections, or -1 for an empty support.
    """
    L = values.shape[0]
    H = L // 2 + 1

    wv = np.empty((L, L))
    for m in range(L):
        for n in range(L):
            wv[m, n] = weights[m, n] * values[m, n]

    r_re = np.empty((H, L))
    r_im = np.empty((H, L))
    _dft_rows(wv, cos_t, sin_t, H, r_re, r_im)

    w_re = np.empty((L, L))
    w_im = np.empty((L, L))
    _dft_rows(weights, cos_t, sin_t, H, w_re, w_im)
    for k in range(H, L):
        for l in range(L):
            w_re[k, l] = w_re[L - k, (L - l) % L]
            w_im[k, l] = -w_im[L - k, (L - l) % L]
    w0 = w_re[0, 0]
    if w0 <= 0.0:
        return -1

    # W tiled 2x2 (flattened) so shifted reads need no modulo
    L2 = 2 * L
    x_re = np.empty(L2 * L2)
    x_im = np.empty(L2 * L2)
    for i in range(L2):
        for j in range(L2):
            x_re[i * L2 + j] = w_re[i % L, j % L]
            x_im[i * L2 + j] = w_im[i % L, j % L]
    f_re = r_re.ravel()
    f_im = r_im.ravel()
    wf_h = wf[:H].ravel()
    pos = _weighted_argmax(f_re, f_im, wf_h)
    for it in range(iterations):
        k0 = pos // L
        l0 = pos % L
        own_partner = (2 * k0) % L == 0 and (2 * l0) % L == 0
        dc_re = gamma * f_re[pos] / w0
        dc_im = 0.0 if own_partner else gamma * f_im[pos] / w0
        sel_k[it] = k0
        sel_l[it] = l0
        sel_re[it] = dc_re
        sel_im[it] = dc_im
        for k in range(H):
            r0 = k * L
            a0 = (k - k0 + L) * L2 + L - l0
            b0 = (k + k0) * L2 + l0
            if own_partner:
                _shift_update_real(f_re, f_im, x_re, x_im, r0, a0, L, dc_re)
            else:
                _shift_update(f_re, f_im, x_re, x_im, r0, a0, b0, L, dc_re, dc_im)
        pos = _weighted_argmax(f_re, f_im, wf_h)
    return iterations


@njit(cache=True)
def _model_at(m, n, count, L, sel_k, sel_l, sel_re, sel_im, cos_t, sin_t):
    g = 0.0
    for i in range(count):
        k0 = sel_k[i]
        l0 = sel_l[i]
        j = (k0 * m + l0 * n) % L
        if (2 * k0) % L == 0 and (2 * l0) % L == 0:
            g += sel_re[i] * cos_t[j]
        else:
            g += 2.0 * (sel_re[i] * cos_t[j] - sel_im[i] * sin_t[j])
    return g


@njit(cache=True)
def _fit_and_model(values, weights, wf, iterations, gamma, cos_t, sin_t):
    L = values.shape[0]
    sel_k = np.zeros(iterations, dtype=np.int64)
    sel_l = np.zeros(iterations, dtype=np.int64)
    sel_re = np.zeros(iterations)
    sel_im = np.zeros(iterations)
    count = _fit_area(values, weights, wf, iterations, gamma, cos_t, sin_t,
                      sel_k, sel_l, sel_re, sel_im)
    model = np.zeros((L, L))
    if count < 0:
        return model, sel_k, sel_l, count
    for m in range(L):
        for n in range(L):
            model[m, n] = _model_at(m, n, count, L, sel_k, sel_l, sel_re, sel_im,
                                    cos_t, sin_t)
    return model, sel_k, sel_l, count


@njit(parallel=True, cache=True)
def _reconstruct_blocks(values_pad, ind_pad, spatial, wf, B, D, iterations, gamma,
                        cos_t, sin_t, order, nbc, out, empty):
    L = B + 2 * D
    for ii in prange(order.size):
        b = order[ii]
        r0 = (b // nbc) * B
        c0 = (b % nbc) * B
        vals = np.empty((L, L))
        w = np.empty((L, L))
        for m in range(L):
            for n in range(L):
                vals[m, n] = values_pad[r0 + m, c0 + n]
                w[m, n] = ind_pad[r0 + m, c0 + n] * spatial[m, n]
        sel_k = np.zeros(iterations, dtype=np.int64)
        sel_l = np.zeros(iterations, dtype=np.int64)
        sel_re = np.zeros(iterations)
        sel_im = np.zeros(iterations)
        count = _fit_area(vals, w, wf, iterations, gamma, cos_t, sin_t,
                          sel_k, sel_l, sel_re, sel_im)
        if count < 0:
            empty[b] = 1
            continue
        for m in range(B):
            for n in range(B):
                out[r0 + m, c0 + n] = _model_at(D + m, D + n, count, L, sel_k, sel_l,
                                                sel_re, sel_im, cos_t, sin_t)


# --------------------------------------------------------------------------
# public API


def build_block_model(support: SupportArea, params: FsrParams, iterations: int | None = None):
    """Sparse Fourier model of one processing area, evaluated on the whole area."""
    L = support.values.shape[0]
    if L != params.area:
        raise DimensionError(f"support is {L}x{L}, params expect L={params.area}")
    cos_t, sin_t = twiddle_tables(L)
    model, _, _, count = _fit_and_model(
        support.values, support.weight_mask, frequency_weight(params),
        iterations or params.iterations, params.gamma, cos_t, sin_t,
    )
    if count < 0:
        raise ValueError("empty support")
    return model


def selected_frequencies(support: SupportArea, params: FsrParams, iterations: int | None = None):
    """(k, l) indices picked by the greedy loop, in selection order."""
    cos_t, sin_t = twiddle_tables(params.area)
    _, sel_k, sel_l, count = _fit_and_model(
        support.values, support.weight_mask, frequency_weight(params),
        iterations or params.iterations, params.gamma, cos_t, sin_t,
    )
    if count < 0:
        raise ValueError("empty support")
    return list(zip(sel_k[:count].tolist(), sel_l[:count].tolist()))


def reconstruct_frame(sampled: SampledFrame, projected=None, params: FsrParams | None = None,
                      overwrite_projected: bool = False, block_order=None) -> Frame:
    """Rebuild a full frame from measurements plus optional projected pixels.

    ``projected`` is a ProjectionBuffer (or None).  With
    ``overwrite_projected`` the projected values replace the model at
    projected-only positions (R-FSR); otherwise they only shape the model
    (D-FSR).  ``block_order`` permutes block processing and exists for
    testing; the result does not depend on it.
    """
    params = params or FsrParams()
    H, W = sampled.shape
    meas = sampled.bits.astype(bool)
    values = sampled.values.copy()
    proj_only = np.zeros_like(meas)
    if projected is not None:
        if projected.shape != sampled.shape:
            raise DimensionError(
                f"projection buffer {projected.shape} and frame {sampled.shape} differ"
            )
        proj_vals, proj_mask = projected.overlay()
        proj_only = proj_mask & ~meas
        values[proj_only] = proj_vals[proj_only]

    B, D, L = params.block_size, params.border, params.area
    nbr, nbc = -(-H // B), -(-W // B)
    shape_pad = (nbr * B + 2 * D, nbc * B + 2 * D)
    values_pad = np.zeros(shape_pad)
    ind_pad = np.zeros(shape_pad)
    values_pad[D:D + H, D:D + W] = values
    ind_pad[D:D + H, D:D + W] = meas + params.kappa * proj_only

    if block_order is None:
        order = np.arange(nbr * nbc, dtype=np.int64)
    else:
        order = np.asarray(block_order, dtype=np.int64)
        if sorted(order.tolist()) != list(range(nbr * nbc)):
            raise ValueError("block_order must be a permutation of all block indices")

    cos_t, sin_t = twiddle_tables(L)
    out = np.zeros((nbr * B, nbc * B))
    empty = np.zeros(nbr * nbc, dtype=np.uint8)
    _reconstruct_blocks(values_pad, ind_pad, spatial_weight(params), frequency_weight(params),
                        B, D, params.iterations, params.gamma, cos_t, sin_t, order, nbc,
                        out, empty)
    if empty.any():
        raise ValueError(f"empty support in {int(empty.sum())} block(s)")

    result = np.clip(out[:H, :W], 0.0, 255.0)
    result[meas] = sampled.values[meas]
    if overwrite_projected:
        result[proj_only] = values[proj_only]
    return Frame(result, t=sampled.frame.t)


def set_threads(n: int) -> None:
    numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))
