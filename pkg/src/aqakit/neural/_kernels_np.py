"""Pure-numpy implementations of the hot conv/pool inner loops.

These are the fallback for the compiled extension.  They iterate only over
kernel taps (9 for a 3x3 conv), keeping the per-element work vectorized,
and they accumulate in the same tap order as the compiled kernels so both
backends produce identical floating-point results.
"""

from __future__ import annotations

import numpy as np


def im2col(xp: np.ndarray, kh: int, kw: int, sh: int, sw: int) -> np.ndarray:
    """(N, C, Hp, Wp) padded input -> (N, C*kh*kw, OH*OW) patch matrix."""
    n, c, hp, wp = xp.shape
    oh = (hp - kh) // sh + 1
    ow = (wp - kw) // sw + 1
    cols = np.empty((n, c, kh, kw, oh, ow), dtype=xp.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i:i + sh * oh:sh, j:j + sw * ow:sw]
    return cols.reshape(n, c * kh * kw, oh * ow)


def col2im(cols: np.ndarray, shape: tuple, kh: int, kw: int,
           sh: int, sw: int) -> np.ndarray:
    """Scatter-add a patch matrix back onto a (N, C, Hp, Wp) canvas."""
    n, c, hp, wp = shape
    oh = (hp - kh) // sh + 1
    ow = (wp - kw) // sw + 1
    cols6 = cols.reshape(n, c, kh, kw, oh, ow)
    xp = np.zeros(shape, dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            xp[:, :, i:i + sh * oh:sh, j:j + sw * ow:sw] += cols6[:, :, i, j]
    return xp


def maxpool_forward(x: np.ndarray, wh: int, ww: int, sh: int, sw: int):
    """Returns (out, argoff) where argoff holds the flat in-window offset
    i*ww + j of each maximum; ties go to the first offset scanned."""
    n, c, h, w = x.shape
    oh = (h - wh) // sh + 1
    ow = (w - ww) // sw + 1
    out = np.full((n, c, oh, ow), -np.inf, dtype=x.dtype)
    argoff = np.zeros((n, c, oh, ow), dtype=np.int64)
    for i in range(wh):
        for j in range(ww):
            window = x[:, :, i:i + sh * oh:sh, j:j + sw * ow:sw]
            better = window > out
            out[better] = window[better]
            argoff[better] = i * ww + j
    return out, argoff


def maxpool_backward(dout: np.ndarray, argoff: np.ndarray, shape: tuple,
                     wh: int, ww: int, sh: int, sw: int) -> np.ndarray:
    n, c, h, w = shape
    oh, ow = dout.shape[2:]
    dx = np.zeros(shape, dtype=dout.dtype)
    for i in range(wh):
        for j in range(ww):
            mask = argoff == (i * ww + j)
            dx[:, :, i:i + sh * oh:sh, j:j + sw * ow:sw] += dout * mask
    return dx


def avgpool_forward(x: np.ndarray, wh: int, ww: int, sh: int, sw: int) -> np.ndarray:
    n, c, h, w = x.shape
    oh = (h - wh) // sh + 1
    ow = (w - ww) // sw + 1
    acc = np.zeros((n, c, oh, ow), dtype=x.dtype)
    for i in range(wh):
        for j in range(ww):
            acc += x[:, :, i:i + sh * oh:sh, j:j + sw * ow:sw]
    return acc / (wh * ww)


def avgpool_backward(dout: np.ndarray, shape: tuple, wh: int, ww: int,
                     sh: int, sw: int) -> np.ndarray:
    n, c, h, w = shape
    oh, ow = dout.shape[2:]
    dx = np.zeros(shape, dtype=dout.dtype)
    spread = dout / (wh * ww)
    for i in range(wh):
        for j in range(ww):
            dx[:, :, i:i + sh * oh:sh, j:j + sw * ow:sw] += spread
    return dx
