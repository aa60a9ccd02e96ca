"""Differentiable ops over Tensor: the layer set the models are built from.

Convolutions run as im2col + BLAS matmul; the patch gather/scatter and the
pooling loops dispatch to the kernels backend (compiled or numpy).
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .tensor import Tensor, make_result


class ShapeError(Exception):
    pass


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a: Tensor, b: Tensor) -> Tensor:
    out = make_result(a.data + b.data, (a, b))
    if out.requires_grad:
        def _bw():
            if a.requires_grad:
                a.accumulate(_unbroadcast(out.grad, a.shape))
            if b.requires_grad:
                b.accumulate(_unbroadcast(out.grad, b.shape))
        out._backward = _bw
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = make_result(a.data * b.data, (a, b))
    if out.requires_grad:
        def _bw():
            if a.requires_grad:
                a.accumulate(_unbroadcast(out.grad * b.data, a.shape))
            if b.requires_grad:
                b.accumulate(_unbroadcast(out.grad * a.data, b.shape))
        out._backward = _bw
    return out


def scale(x: Tensor, c: float) -> Tensor:
    out = make_result(x.data * c, (x,))
    if out.requires_grad:
        def _bw():
            x.accumulate(out.grad * c)
        out._backward = _bw
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul expects 2-d operands, got {a.shape} @ {b.shape}")
    out = make_result(a.data @ b.data, (a, b))
    if out.requires_grad:
        def _bw():
            if a.requires_grad:
                a.accumulate(out.grad @ b.data.T)
            if b.requires_grad:
                b.accumulate(a.data.T @ out.grad)
        out._backward = _bw
    return out


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """x (N, D) @ w (F, D)^T + b (F,)."""
    if x.data.shape[1] != w.data.shape[1]:
        raise ShapeError(f"linear: input {x.shape} vs weight {w.shape}")
    data = x.data @ w.data.T
    if b is not None:
        data = data + b.data
    parents = (x, w) if b is None else (x, w, b)
    out = make_result(data, parents)
    if out.requires_grad:
        def _bw():
            if x.requires_grad:
                x.accumulate(out.grad @ w.data)
            if w.requires_grad:
                w.accumulate(out.grad.T @ x.data)
            if b is not None and b.requires_grad:
                b.accumulate(out.grad.sum(axis=0))
        out._backward = _bw
    return out


def relu(x: Tensor) -> Tensor:
    out = make_result(np.maximum(x.data, 0), (x,))
    if out.requires_grad:
        def _bw():
            x.accumulate(out.grad * (x.data > 0))
        out._backward = _bw
    return out


def sigmoid(x: Tensor) -> Tensor:
    data = 1.0 / (1.0 + np.exp(-x.data))
    out = make_result(data, (x,))
    if out.requires_grad:
        def _bw():
            x.accumulate(out.grad * data * (1.0 - data))
        out._backward = _bw
    return out


def tanh(x: Tensor) -> Tensor:
    data = np.tanh(x.data)
    out = make_result(data, (x,))
    if out.requires_grad:
        def _bw():
            x.accumulate(out.grad * (1.0 - data * data))
        out._backward = _bw
    return out


def reshape(x: Tensor, shape: tuple) -> Tensor:
    out = make_result(x.data.reshape(shape), (x,))
    if out.requires_grad:
        def _bw():
            x.accumulate(out.grad.reshape(x.shape))
        out._backward = _bw
    return out


def concat(tensors: list[Tensor], axis: int = 1) -> Tensor:
    out = make_result(np.concatenate([t.data for t in tensors], axis=axis),
                      tuple(tensors))
    if out.requires_grad:
        sizes = [t.data.shape[axis] for t in tensors]
        offsets = np.cumsum([0] + sizes)

        def _bw():
            for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
                if t.requires_grad:
                    sl = [slice(None)] * out.grad.ndim
                    sl[axis] = slice(lo, hi)
                    t.accumulate(out.grad[tuple(sl)])
        out._backward = _bw
    return out


def slice_axis(x: Tensor, axis: int, start: int, stop: int) -> Tensor:
    sl = [slice(None)] * x.data.ndim
    sl[axis] = slice(start, stop)
    sl = tuple(sl)
    out = make_result(np.ascontiguousarray(x.data[sl]), (x,))
    if out.requires_grad:
        def _bw():
            if x.grad is None:
                x.grad = np.zeros_like(x.data)
            x.grad[sl] += out.grad
        out._backward = _bw
    return out


def embedding(table: Tensor, indices: np.ndarray) -> Tensor:
    idx = np.asarray(indices)
    out = make_result(table.data[idx], (table,))
    if out.requires_grad:
        def _bw():
            if table.grad is None:
                table.grad = np.zeros_like(table.data)
            np.add.at(table.grad, idx, out.grad)
        out._backward = _bw
    return out


# ---------------------------------------------------------------------------
# Convolution and pooling
# ---------------------------------------------------------------------------

def conv2d(x: Tensor, w: Tensor, b: Tensor | None,
           stride: tuple[int, int] = (1, 1),
           padding: tuple[int, int] = (0, 0)) -> Tensor:
    """x (N, Cin, H, W) * w (Cout, Cin, KH, KW) with zero padding."""
    n, cin, h, wd = x.data.shape
    cout, cin_w, kh, kw = w.data.shape
    if cin != cin_w:
        raise ShapeError(f"conv2d: input {x.shape} does not match weight {w.shape}")
    sh, sw = stride
    ph, pw = padding
    if h + 2 * ph < kh or wd + 2 * pw < kw:
        raise ShapeError(f"conv2d: input {x.shape} too small for kernel "
                         f"{(kh, kw)} with padding {(ph, pw)}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    cols = kernels.im2col(xp, kh, kw, sh, sw)            # (N, K, L)
    w2 = w.data.reshape(cout, -1)
    oh = (h + 2 * ph - kh) // sh + 1
    ow = (wd + 2 * pw - kw) // sw + 1
    data = np.matmul(w2, cols).reshape(n, cout, oh, ow)
    if b is not None:
        data = data + b.data.reshape(1, -1, 1, 1)
    parents = (x, w) if b is None else (x, w, b)
    out = make_result(data, parents)
    if out.requires_grad:
        def _bw():
            dout2 = out.grad.reshape(n, cout, oh * ow)
            if b is not None and b.requires_grad:
                b.accumulate(dout2.sum(axis=(0, 2)))
            if w.requires_grad:
                dw2 = np.tensordot(dout2, cols, axes=([0, 2], [0, 2]))
                w.accumulate(dw2.reshape(w.data.shape))
            if x.requires_grad:
                dcols = np.ascontiguousarray(np.matmul(w2.T, dout2))
                dxp = kernels.col2im(dcols, xp.shape, kh, kw, sh, sw)
                if ph or pw:
                    dxp = dxp[:, :, ph:ph + h, pw:pw + wd]
                x.accumulate(dxp)
        out._backward = _bw
    return out


def maxpool2d(x: Tensor, window: tuple[int, int] = (2, 2),
              stride: tuple[int, int] | None = None) -> Tensor:
    wh, ww = window
    sh, sw = stride if stride is not None else window
    n, c, h, wd = x.data.shape
    if h < wh or wd < ww:
        raise ShapeError(f"maxpool2d: input {x.shape} smaller than window {window}")
    data, argoff = kernels.maxpool_forward(np.ascontiguousarray(x.data), wh, ww, sh, sw)
    out = make_result(data, (x,))
    if out.requires_grad:
        def _bw():
            x.accumulate(kernels.maxpool_backward(
                np.ascontiguousarray(out.grad), argoff, x.data.shape, wh, ww, sh, sw))
        out._backward = _bw
    return out


def avgpool2d(x: Tensor, window: tuple[int, int],
              stride: tuple[int, int] | None = None) -> Tensor:
    wh, ww = window
    sh, sw = stride if stride is not None else window
    n, c, h, wd = x.data.shape
    if h < wh or wd < ww:
        raise ShapeError(f"avgpool2d: input {x.shape} smaller than window {window}")
    data = kernels.avgpool_forward(np.ascontiguousarray(x.data), wh, ww, sh, sw)
    out = make_result(data, (x,))
    if out.requires_grad:
        def _bw():
            x.accumulate(kernels.avgpool_backward(
                np.ascontiguousarray(out.grad), x.data.shape, wh, ww, sh, sw))
        out._backward = _bw
    return out


def global_avg_pool(x: Tensor, width_mask: np.ndarray | None = None) -> Tensor:
    """Mean over (H, W); a (N, W) 0/1 mask restricts the mean to valid
    columns so zero padding never dilutes the pooled value."""
    n, c, h, wd = x.data.shape
    if width_mask is None:
        out = make_result(x.data.mean(axis=(2, 3)), (x,))
        if out.requires_grad:
            def _bw():
                x.accumulate(np.broadcast_to(
                    out.grad[:, :, None, None] / (h * wd), x.data.shape))
            out._backward = _bw
        return out
    wm = width_mask.astype(x.data.dtype)
    denom = (h * wm.sum(axis=1)).reshape(n, 1)           # (N, 1)
    data = (x.data * wm[:, None, None, :]).sum(axis=(2, 3)) / denom
    out = make_result(data, (x,))
    if out.requires_grad:
        def _bw():
            g = out.grad / denom                          # (N, C)
            x.accumulate(g[:, :, None, None] * wm[:, None, None, :])
        out._backward = _bw
    return out


# ---------------------------------------------------------------------------
# Modulation, normalization, loss
# ---------------------------------------------------------------------------

def film(x: Tensor, gamma: Tensor, beta: Tensor) -> Tensor:
    """Per-channel affine: out[n, i] = gamma[n, i] * x[n, i] + beta[n, i]."""
    n, c = x.data.shape[:2]
    if gamma.data.shape != (n, c) or beta.data.shape != (n, c):
        raise ShapeError(f"film: params {gamma.shape}/{beta.shape} do not match "
                         f"feature channels {(n, c)}")
    data = gamma.data[:, :, None, None] * x.data + beta.data[:, :, None, None]
    out = make_result(data, (x, gamma, beta))
    if out.requires_grad:
        def _bw():
            if x.requires_grad:
                x.accumulate(out.grad * gamma.data[:, :, None, None])
            if gamma.requires_grad:
                gamma.accumulate((out.grad * x.data).sum(axis=(2, 3)))
            if beta.requires_grad:
                beta.accumulate(out.grad.sum(axis=(2, 3)))
        out._backward = _bw
    return out


class BatchNorm2d:
    """Channel batch normalization with running statistics.

    Training mode normalizes with batch statistics and updates the running
    buffers; eval mode uses the frozen running statistics.
    """

    def __init__(self, channels: int, affine: bool = True, eps: float = 1e-5,
                 momentum: float = 0.1, dtype=np.float32):
        self.channels = channels
        self.affine = affine
        self.eps = eps
        self.momentum = momentum
        self.gamma = Tensor(np.ones(channels, dtype=dtype), requires_grad=True) \
            if affine else None
        self.beta = Tensor(np.zeros(channels, dtype=dtype), requires_grad=True) \
            if affine else None
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)

    def parameters(self) -> list[Tensor]:
        return [self.gamma, self.beta] if self.affine else []

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        if x.data.shape[1] != self.channels:
            raise ShapeError(f"batchnorm: {x.shape} vs {self.channels} channels")
        if training:
            if x.data.shape[0] < 2:
                raise ShapeError("batchnorm training mode requires batch > 1")
            mean = x.data.mean(axis=(0, 2, 3))
            var = x.data.var(axis=(0, 2, 3))
            self.running_mean = ((1 - self.momentum) * self.running_mean
                                 + self.momentum * mean).astype(x.data.dtype)
            self.running_var = ((1 - self.momentum) * self.running_var
                                + self.momentum * var).astype(x.data.dtype)
        else:
            mean = self.running_mean
            var = self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x.data - mean[None, :, None, None]) * inv_std[None, :, None, None]
        data = xhat
        if self.affine:
            data = (self.gamma.data[None, :, None, None] * xhat
                    + self.beta.data[None, :, None, None])
        parents = (x,) + tuple(self.parameters())
        out = make_result(data, parents)
        if out.requires_grad:
            def _bw():
                dout = out.grad
                dxhat = dout
                if self.affine:
                    if self.gamma.requires_grad:
                        self.gamma.accumulate((dout * xhat).sum(axis=(0, 2, 3)))
                    if self.beta.requires_grad:
                        self.beta.accumulate(dout.sum(axis=(0, 2, 3)))
                    dxhat = dout * self.gamma.data[None, :, None, None]
                if not x.requires_grad:
                    return
                if training:
                    m = x.data.shape[0] * x.data.shape[2] * x.data.shape[3]
                    mean_dxhat = dxhat.mean(axis=(0, 2, 3), keepdims=True)
                    mean_dxhat_xhat = (dxhat * xhat).mean(axis=(0, 2, 3), keepdims=True)
                    dx = (inv_std[None, :, None, None]
                          * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat))
                    del m
                else:
                    dx = dxhat * inv_std[None, :, None, None]
                x.accumulate(dx)
            out._backward = _bw
        return out


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log-likelihood over the batch."""
    labels = np.asarray(labels)
    n, k = logits.data.shape
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"labels must lie in [0, {k}), got "
                         f"[{labels.min()}, {labels.max()}]")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - logsumexp
    loss = -logp[np.arange(n), labels].mean()
    out = make_result(np.asarray(loss, dtype=logits.data.dtype), (logits,))
    if out.requires_grad:
        def _bw():
            grad = np.exp(logp)
            grad[np.arange(n), labels] -= 1.0
            logits.accumulate(grad * (out.grad / n))
        out._backward = _bw
    return out


def softmax_probs(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# Coordinate maps and LSTM
# ---------------------------------------------------------------------------

def coord_maps(h: int, w: int, dtype=np.float32) -> np.ndarray:
    """(2, h, w): channel 0 ramps -1..1 along the time (width) axis,
    channel 1 along the frequency (height) axis; size-1 axes sit at 0."""
    time = np.linspace(-1.0, 1.0, w, dtype=dtype) if w > 1 else np.zeros(1, dtype=dtype)
    freq = np.linspace(-1.0, 1.0, h, dtype=dtype) if h > 1 else np.zeros(1, dtype=dtype)
    maps = np.empty((2, h, w), dtype=dtype)
    maps[0] = np.broadcast_to(time[None, :], (h, w))
    maps[1] = np.broadcast_to(freq[:, None], (h, w))
    return maps


class LSTM:
    """Unidirectional multi-layer LSTM composed from primitive ops.

    Gate layout is (input, forget, cell, output); forget-gate biases start
    at 1.  A per-step (N, 1) mask freezes state past each sequence's end so
    the returned final state belongs to the last real step.
    """

    def __init__(self, input_size: int, hidden_size: int, layers: int,
                 rng: np.random.Generator, dtype=np.float32):
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.layers = layers
        self.params: list[dict[str, Tensor]] = []
        for layer in range(layers):
            in_dim = input_size if layer == 0 else hidden_size
            bound_ih = 1.0 / np.sqrt(in_dim)
            bound_hh = 1.0 / np.sqrt(hidden_size)
            w_ih = rng.uniform(-bound_ih, bound_ih, (4 * hidden_size, in_dim))
            w_hh = rng.uniform(-bound_hh, bound_hh, (4 * hidden_size, hidden_size))
            b = np.zeros(4 * hidden_size)
            b[hidden_size:2 * hidden_size] = 1.0
            self.params.append({
                "w_ih": Tensor(w_ih.astype(dtype), requires_grad=True),
                "w_hh": Tensor(w_hh.astype(dtype), requires_grad=True),
                "b": Tensor(b.astype(dtype), requires_grad=True),
            })

    def parameters(self) -> list[Tensor]:
        out = []
        for p in self.params:
            out.extend(p.values())
        return out

    def __call__(self, steps: list[Tensor],
                 masks: list[np.ndarray] | None = None) -> Tensor:
        if not steps:
            raise ShapeError("lstm needs at least one step")
        n = steps[0].data.shape[0]
        dtype = steps[0].data.dtype
        hidden = self.hidden_size
        seq = steps
        for layer in range(self.layers):
            p = self.params[layer]
            h = Tensor(np.zeros((n, hidden), dtype=dtype))
            c = Tensor(np.zeros((n, hidden), dtype=dtype))
            outputs = []
            for t, x in enumerate(seq):
                gates = add(linear(x, p["w_ih"], p["b"]), linear(h, p["w_hh"]))
                i = sigmoid(slice_axis(gates, 1, 0, hidden))
                f = sigmoid(slice_axis(gates, 1, hidden, 2 * hidden))
                g = tanh(slice_axis(gates, 1, 2 * hidden, 3 * hidden))
                o = sigmoid(slice_axis(gates, 1, 3 * hidden, 4 * hidden))
                c_new = add(mul(f, c), mul(i, g))
                h_new = mul(o, tanh(c_new))
                if masks is not None:
                    m = Tensor(masks[t].astype(dtype))
                    keep = Tensor(1.0 - masks[t].astype(dtype))
                    c = add(mul(m, c_new), mul(keep, c))
                    h = add(mul(m, h_new), mul(keep, h))
                else:
                    c, h = c_new, h_new
                outputs.append(h)
            seq = outputs
        return seq[-1]
