"""Lossless Haar wavelet pyramid encoder-decoder.

One analysis level splits a [C, H, W] tensor into four half-resolution
subbands via separable orthonormal Haar filtering (low-pass [1/sqrt2, 1/sqrt2],
high-pass [1/sqrt2, -1/sqrt2], paired samples (2n, 2n+1)):

    ll  low along H, low along W   (the coarse approximation)
    lh  low along H, high along W  (detail in the width direction)
    hl  high along H, low along W  (detail in the height direction)
    hh  high along both            (diagonal detail)

Because the filters are orthonormal the synthesis step uses the same
coefficients and the transform is exactly invertible; the adjoint of analysis
equals synthesis, which is what the gradient closures exploit.

A matrix-form twin realizes the same level as B = M A M^T per channel, where
M stacks all low-pass rows above all high-pass rows.  B then holds the
subbands as quadrants, and the documented permutation between the packed
layout and the four separate tensors is:

    ll = B[:n, :n]   lh = B[:n, n:]   hl = B[n:, :n]   hh = B[n:, n:]

The filter form is the production path (general extents, differentiable);
the matrix form requires square spatial extents and exists for verification.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .tensor import Tensor, concat, custom_op

INV_SQRT2 = 1.0 / np.sqrt(2.0)

#: Analysis low-pass / high-pass coefficient pairs; synthesis uses the same
#: values (orthonormal case).
LOW_PASS = (INV_SQRT2, INV_SQRT2)
HIGH_PASS = (INV_SQRT2, -INV_SQRT2)


@dataclass
class WaveletLevel:
    """The four equally shaped subbands of one analysis level."""

    ll: Tensor
    lh: Tensor
    hl: Tensor
    hh: Tensor

    def __post_init__(self):
        shapes = {t.shape for t in (self.ll, self.lh, self.hl, self.hh)}
        if len(shapes) != 1:
            raise ContractError(f"subband extents disagree: {sorted(shapes)}")

    @property
    def shape(self):
        return self.ll.shape

    def components(self):
        return (self.ll, self.lh, self.hl, self.hh)


@dataclass
class WaveletPyramid:
    """Analysis levels ordered fine to coarse plus bookkeeping for decode.

    ``pads`` records the (bottom, right) reflect padding applied before each
    level so decoding can crop back; all zeros for even dyadic extents.  For
    unpadded pyramids the coefficient count of the final ll plus every detail
    subband equals H*W per channel (critical sampling).
    """

    levels: list[WaveletLevel]
    original_extents: tuple[int, int]
    pads: list[tuple[int, int]] = field(default_factory=list)

    @property
    def coarsest_ll(self):
        return self.levels[-1].ll

    def coefficient_count(self):
        per_level = sum(
            lvl.lh.size + lvl.hl.size + lvl.hh.size for lvl in self.levels
        )
        return per_level + self.coarsest_ll.size


def _require_chw(x):
    if x.data.ndim != 3:
        raise ContractError(f"expected a [C,H,W] tensor, got shape {x.shape}")


def _split_pairs(d, axis):
    even = d[:, 0::2, :] if axis == 1 else d[:, :, 0::2]
    odd = d[:, 1::2, :] if axis == 1 else d[:, :, 1::2]
    return even, odd


def _dwt2_arrays(d):
    a, b = _split_pairs(d, axis=1)
    low_h = (a + b) * INV_SQRT2
    high_h = (a - b) * INV_SQRT2
    le, lo = _split_pairs(low_h, axis=2)
    he, ho = _split_pairs(high_h, axis=2)
    ll = (le + lo) * INV_SQRT2
    lh = (le - lo) * INV_SQRT2
    hl = (he + ho) * INV_SQRT2
    hh = (he - ho) * INV_SQRT2
    return ll, lh, hl, hh


def _idwt2_arrays(ll, lh, hl, hh):
    c, hh2, ww2 = ll.shape
    low_h = np.empty((c, hh2, 2 * ww2), dtype=ll.dtype)
    high_h = np.empty_like(low_h)
    low_h[:, :, 0::2] = (ll + lh) * INV_SQRT2
    low_h[:, :, 1::2] = (ll - lh) * INV_SQRT2
    high_h[:, :, 0::2] = (hl + hh) * INV_SQRT2
    high_h[:, :, 1::2] = (hl - hh) * INV_SQRT2
    out = np.empty((c, 2 * hh2, 2 * ww2), dtype=ll.dtype)
    out[:, 0::2, :] = (low_h + high_h) * INV_SQRT2
    out[:, 1::2, :] = (low_h - high_h) * INV_SQRT2
    return out


def dwt2(x: Tensor) -> WaveletLevel:
    """One separable Haar analysis level of a [C, H, W] tensor (H, W even)."""
    _require_chw(x)
    _, h, w = x.shape
    if h % 2 or w % 2:
        raise ContractError(f"dwt2 requires even spatial extents, got {h}x{w}")
    ll, lh, hl, hh = _dwt2_arrays(x.data)

    def make(arr, band):
        # The adjoint of extracting one orthonormal subband is synthesizing
        # from that subband alone.
        def grad_fn(g):
            zeros = np.zeros_like(g)
            parts = {"ll": zeros, "lh": zeros, "hl": zeros, "hh": zeros}
            parts[band] = g
            return (_idwt2_arrays(parts["ll"], parts["lh"], parts["hl"], parts["hh"]),)

        return custom_op(arr, (x,), grad_fn)

    return WaveletLevel(make(ll, "ll"), make(lh, "lh"), make(hl, "hl"), make(hh, "hh"))


def idwt2(level: WaveletLevel) -> Tensor:
    """Exact inverse of ``dwt2``; the adjoint re-analyzes the gradient."""
    parents = level.components()
    out = _idwt2_arrays(*(t.data for t in parents))

    def grad_fn(g):
        return _dwt2_arrays(g)

    return custom_op(out, parents, grad_fn)


# -- matrix-form twins -------------------------------------------------------


def haar_matrix(size, dtype=np.float64):
    """The orthogonal analysis matrix M for an even extent ``size``."""
    if size % 2:
        raise ContractError(f"haar matrix needs an even extent, got {size}")
    n = size // 2
    m = np.zeros((size, size), dtype=dtype)
    for i in range(n):
        m[i, 2 * i] = LOW_PASS[0]
        m[i, 2 * i + 1] = LOW_PASS[1]
        m[n + i, 2 * i] = HIGH_PASS[0]
        m[n + i, 2 * i + 1] = HIGH_PASS[1]
    return m


def dwt2_matrix(x: Tensor) -> WaveletLevel:
    """Matrix-form analysis (square extents); verification twin, no tape."""
    _require_chw(x)
    _, h, w = x.shape
    if h != w:
        raise ContractError(f"matrix form requires square spatial extents, got {h}x{w}")
    if h % 2:
        raise ContractError(f"matrix form requires even extents, got {h}")
    m = haar_matrix(h, dtype=x.dtype)
    packed = np.einsum("ij,cjk,lk->cil", m, x.data, m)
    n = h // 2
    return WaveletLevel(
        Tensor(packed[:, :n, :n]),
        Tensor(packed[:, :n, n:]),
        Tensor(packed[:, n:, :n]),
        Tensor(packed[:, n:, n:]),
    )


def idwt2_matrix(level: WaveletLevel) -> Tensor:
    """Matrix-form synthesis; inverse of ``dwt2_matrix``."""
    _, n, nw = level.shape
    if n != nw:
        raise ContractError(f"matrix form requires square subbands, got {n}x{nw}")
    size = 2 * n
    packed = np.empty((level.ll.shape[0], size, size), dtype=level.ll.dtype)
    packed[:, :n, :n] = level.ll.data
    packed[:, :n, n:] = level.lh.data
    packed[:, n:, :n] = level.hl.data
    packed[:, n:, n:] = level.hh.data
    m = haar_matrix(size, dtype=level.ll.dtype)
    return Tensor(np.einsum("ji,cjk,kl->cil", m, packed, m))


# -- pyramid -----------------------------------------------------------------


def _pad_to_even(x):
    """Reflect-pad (edge repeat) the bottom/right by one where odd."""
    _, h, w = x.shape
    pad_h = h % 2
    pad_w = w % 2
    if pad_h:
        x = concat([x, x[:, -1:, :]], axis=1)
    if pad_w:
        x = concat([x, x[:, :, -1:]], axis=2)
    return x, (pad_h, pad_w)


def encode_pyramid(x: Tensor, levels: int, pad: str = "none") -> WaveletPyramid:
    """Recursive analysis of the ll path; details are retained at every level."""
    _require_chw(x)
    if levels < 1:
        raise ContractError(f"need at least one level, got {levels}")
    if pad not in ("none", "reflect"):
        raise ContractError(f"unknown pad mode {pad!r}")
    _, h, w = x.shape
    if pad == "none" and (h % (1 << levels) or w % (1 << levels)):
        raise ContractError(
            f"extents {h}x{w} not divisible by 2^{levels}; enable reflect padding"
        )
    out = WaveletPyramid(levels=[], original_extents=(h, w))
    current = x
    for _ in range(levels):
        if pad == "reflect":
            current, applied = _pad_to_even(current)
        else:
            applied = (0, 0)
        level = dwt2(current)
        out.levels.append(level)
        out.pads.append(applied)
        current = level.ll
    return out


def _map_band(band: Tensor, channel_map: Tensor) -> Tensor:
    c, h, w = band.shape
    mapped = band.reshape(c, h * w).transpose() @ channel_map
    return mapped.transpose().reshape(channel_map.shape[1], h, w)


def decode_pyramid(pyramid: WaveletPyramid, processed_ll: Tensor,
                   detail_maps=None) -> Tensor:
    """Recursive synthesis merging processed coarse features with stored details.

    Details pass through unmodified by default (identity skips); supplying
    ``detail_maps`` (one square [C, C] tensor per level, fine to coarse)
    routes each detail band through a learnable per-pixel channel map.  With
    ``processed_ll`` equal to the original coarsest ll and identity skips
    this reconstructs the encoder input exactly (up to float rounding).
    """
    if processed_ll.shape != pyramid.coarsest_ll.shape:
        raise ContractError(
            f"processed ll shape {processed_ll.shape} does not match "
            f"coarsest ll {pyramid.coarsest_ll.shape}"
        )
    if detail_maps is not None and len(detail_maps) != len(pyramid.levels):
        raise ContractError(
            f"{len(detail_maps)} detail maps for {len(pyramid.levels)} levels"
        )
    current = processed_ll
    for i, (level, (pad_h, pad_w)) in enumerate(
        zip(reversed(pyramid.levels), reversed(pyramid.pads))
    ):
        details = (level.lh, level.hl, level.hh)
        if detail_maps is not None:
            channel_map = detail_maps[len(pyramid.levels) - 1 - i]
            details = tuple(_map_band(band, channel_map) for band in details)
        current = idwt2(WaveletLevel(current, *details))
        if pad_h:
            current = current[:, :-1, :]
        if pad_w:
            current = current[:, :, :-1]
    return current


def max_reconstruction_error(size, levels, channels=1, trials=20, dtype=np.float64, seed=0):
    """Worst-case |decode(encode(x)) - x| over random inputs; CLI helper."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        x = Tensor(rng.standard_normal((channels, size, size)), dtype=dtype)
        pyramid = encode_pyramid(x, levels)
        back = decode_pyramid(pyramid, pyramid.coarsest_ll)
        worst = max(worst, float(np.max(np.abs(back.data - x.data))))
    return worst
