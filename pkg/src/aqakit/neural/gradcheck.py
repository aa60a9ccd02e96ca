"""Finite-difference verification of reverse-mode gradients.

Runs in double precision: central differences around each checked
coordinate against the analytic gradient from one backward pass.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor

DENOM_FLOOR = 1e-8


def grad_check(build_loss, tensors: list[Tensor], eps: float = 1e-5,
               max_coords: int = 200, seed: int = 0) -> float:
    """Max relative error between analytic and numeric gradients.

    `build_loss` must rebuild the graph from the current tensor values and
    return a scalar Tensor.  Large tensors are spot-checked on up to
    `max_coords` sampled coordinates; small ones exhaustively.
    """
    for t in tensors:
        if t.data.dtype != np.float64:
            raise ValueError("grad_check requires float64 tensors")
        t.zero_grad()
    loss = build_loss()
    if not np.all(np.isfinite(loss.data)):
        raise FloatingPointError("non-finite loss in grad_check forward")
    loss.backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy()
                for t in tensors]

    rng = np.random.default_rng(seed)
    worst = 0.0
    for t, ag in zip(tensors, analytic):
        flat = t.data.reshape(-1)
        size = flat.size
        if size <= max_coords:
            coords = np.arange(size)
        else:
            coords = rng.choice(size, size=max_coords, replace=False)
        for c in coords:
            orig = flat[c]
            flat[c] = orig + eps
            up = float(build_loss().data.reshape(-1)[0])
            flat[c] = orig - eps
            down = float(build_loss().data.reshape(-1)[0])
            flat[c] = orig
            numeric = (up - down) / (2.0 * eps)
            a = float(ag.reshape(-1)[c])
            err = abs(a - numeric) / max(abs(a), abs(numeric), DENOM_FLOOR)
            worst = max(worst, err)
    return worst
