# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled conv/pool inner loops.

Same contracts as _kernels_np; the numpy versions remain the reference.
Accumulation order matches the numpy tap order so results are bitwise
identical across backends.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef fused real:
    float
    double


def im2col(real[:, :, :, ::1] xp, int kh, int kw, int sh, int sw):
    cdef Py_ssize_t n = xp.shape[0], c = xp.shape[1]
    cdef Py_ssize_t hp = xp.shape[2], wp = xp.shape[3]
    cdef Py_ssize_t oh = (hp - kh) // sh + 1
    cdef Py_ssize_t ow = (wp - kw) // sw + 1
    dtype = np.float32 if real is float else np.float64
    out_arr = np.empty((n, c * kh * kw, oh * ow), dtype=dtype)
    cdef real[:, :, ::1] out = out_arr
    cdef Py_ssize_t b, ch, i, j, y, x, row
    with nogil:
        for b in range(n):
            for ch in range(c):
                for i in range(kh):
                    for j in range(kw):
                        row = (ch * kh + i) * kw + j
                        for y in range(oh):
                            for x in range(ow):
                                out[b, row, y * ow + x] = xp[b, ch, y * sh + i, x * sw + j]
    return out_arr


def col2im(real[:, :, ::1] cols, Py_ssize_t n, Py_ssize_t c, Py_ssize_t hp,
           Py_ssize_t wp, int kh, int kw, int sh, int sw):
    cdef Py_ssize_t oh = (hp - kh) // sh + 1
    cdef Py_ssize_t ow = (wp - kw) // sw + 1
    dtype = np.float32 if real is float else np.float64
    xp_arr = np.zeros((n, c, hp, wp), dtype=dtype)
    cdef real[:, :, :, ::1] xp = xp_arr
    cdef Py_ssize_t b, ch, i, j, y, x, row
    with nogil:
        for b in range(n):
            for ch in range(c):
                for i in range(kh):
                    for j in range(kw):
                        row = (ch * kh + i) * kw + j
                        for y in range(oh):
                            for x in range(ow):
                                xp[b, ch, y * sh + i, x * sw + j] += cols[b, row, y * ow + x]
    return xp_arr


def maxpool_forward(real[:, :, :, ::1] x, int wh, int ww, int sh, int sw):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1]
    cdef Py_ssize_t h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t oh = (h - wh) // sh + 1
    cdef Py_ssize_t ow = (w - ww) // sw + 1
    dtype = np.float32 if real is float else np.float64
    out_arr = np.empty((n, c, oh, ow), dtype=dtype)
    arg_arr = np.zeros((n, c, oh, ow), dtype=np.int64)
    cdef real[:, :, :, ::1] out = out_arr
    cdef cnp.int64_t[:, :, :, ::1] argoff = arg_arr
    cdef Py_ssize_t b, ch, y, x_, i, j
    cdef real best, v
    cdef Py_ssize_t besto
    with nogil:
        for b in range(n):
            for ch in range(c):
                for y in range(oh):
                    for x_ in range(ow):
                        best = x[b, ch, y * sh, x_ * sw]
                        besto = 0
                        for i in range(wh):
                            for j in range(ww):
                                v = x[b, ch, y * sh + i, x_ * sw + j]
                                if v > best:
                                    best = v
                                    besto = i * ww + j
                        out[b, ch, y, x_] = best
                        argoff[b, ch, y, x_] = besto
    return out_arr, arg_arr


def maxpool_backward(real[:, :, :, ::1] dout, cnp.int64_t[:, :, :, ::1] argoff,
                     Py_ssize_t n, Py_ssize_t c, Py_ssize_t h, Py_ssize_t w,
                     int wh, int ww, int sh, int sw):
    cdef Py_ssize_t oh = dout.shape[2], ow = dout.shape[3]
    dtype = np.float32 if real is float else np.float64
    dx_arr = np.zeros((n, c, h, w), dtype=dtype)
    cdef real[:, :, :, ::1] dx = dx_arr
    cdef Py_ssize_t b, ch, y, x_, off
    with nogil:
        for b in range(n):
            for ch in range(c):
                for y in range(oh):
                    for x_ in range(ow):
                        off = argoff[b, ch, y, x_]
                        dx[b, ch, y * sh + off // ww, x_ * sw + off % ww] += dout[b, ch, y, x_]
    return dx_arr


def avgpool_forward(real[:, :, :, ::1] x, int wh, int ww, int sh, int sw):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1]
    cdef Py_ssize_t h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t oh = (h - wh) // sh + 1
    cdef Py_ssize_t ow = (w - ww) // sw + 1
    dtype = np.float32 if real is float else np.float64
    out_arr = np.zeros((n, c, oh, ow), dtype=dtype)
    cdef real[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t b, ch, y, x_, i, j
    cdef real acc
    cdef real denom = <real> (wh * ww)
    with nogil:
        for b in range(n):
            for ch in range(c):
                for y in range(oh):
                    for x_ in range(ow):
                        acc = 0
                        for i in range(wh):
                            for j in range(ww):
                                acc += x[b, ch, y * sh + i, x_ * sw + j]
                        out[b, ch, y, x_] = acc / denom
    return out_arr


def avgpool_backward(real[:, :, :, ::1] dout, Py_ssize_t n, Py_ssize_t c,
                     Py_ssize_t h, Py_ssize_t w, int wh, int ww, int sh, int sw):
    cdef Py_ssize_t oh = dout.shape[2], ow = dout.shape[3]
    dtype = np.float32 if real is float else np.float64
    dx_arr = np.zeros((n, c, h, w), dtype=dtype)
    cdef real[:, :, :, ::1] dx = dx_arr
    cdef Py_ssize_t b, ch, y, x_, i, j
    cdef real denom = <real> (wh * ww)
    cdef real g
    with nogil:
        for b in range(n):
            for ch in range(c):
                for y in range(oh):
                    for x_ in range(ow):
                        g = dout[b, ch, y, x_] / denom
                        for i in range(wh):
                            for j in range(ww):
                                dx[b, ch, y * sh + i, x_ * sw + j] += g
    return dx_arr
