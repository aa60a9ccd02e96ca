"""Kernel backend selection: compiled extension if importable, numpy otherwise.

Set AQAKIT_KERNELS=numpy (or =cython) to force a backend; forcing cython
when the extension is missing raises immediately rather than silently
falling back.
"""

from __future__ import annotations

import os

from . import _kernels_np

_forced = os.environ.get("AQAKIT_KERNELS", "").strip().lower()

if _forced == "numpy":
    _impl = _kernels_np
    BACKEND = "numpy"
else:
    try:
        from . import _kernels_cy as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        if _forced == "cython":
            raise ImportError(
                "AQAKIT_KERNELS=cython but the compiled extension is not built; "
                "run `python setup.py build_ext --inplace`")
        _impl = _kernels_np
        BACKEND = "numpy"


def im2col(xp, kh, kw, sh, sw):
    return _impl.im2col(xp, kh, kw, sh, sw)


def col2im(cols, shape, kh, kw, sh, sw):
    if _impl is _kernels_np:
        return _kernels_np.col2im(cols, shape, kh, kw, sh, sw)
    n, c, hp, wp = shape
    return _impl.col2im(cols, n, c, hp, wp, kh, kw, sh, sw)


def maxpool_forward(x, wh, ww, sh, sw):
    return _impl.maxpool_forward(x, wh, ww, sh, sw)


def maxpool_backward(dout, argoff, shape, wh, ww, sh, sw):
    if _impl is _kernels_np:
        return _kernels_np.maxpool_backward(dout, argoff, shape, wh, ww, sh, sw)
    n, c, h, w = shape
    return _impl.maxpool_backward(dout, argoff, n, c, h, w, wh, ww, sh, sw)


def avgpool_forward(x, wh, ww, sh, sw):
    return _impl.avgpool_forward(x, wh, ww, sh, sw)


def avgpool_backward(dout, shape, wh, ww, sh, sw):
    if _impl is _kernels_np:
        return _kernels_np.avgpool_backward(dout, shape, wh, ww, sh, sw)
    n, c, h, w = shape
    return _impl.avgpool_backward(dout, n, c, h, w, wh, ww, sh, sw)
