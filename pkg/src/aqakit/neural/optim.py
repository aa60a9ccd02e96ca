"""Adam with decoupled weight decay (coupled L2 available as a switch)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


@dataclass
class Hyperparams:
    learning_rate: float = 1e-4
    weight_decay: float = 1e-5
    batch_size: int = 40
    epochs: int = 100
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    decoupled_decay: bool = True

    def __post_init__(self):
        for name in ("learning_rate", "batch_size", "epochs"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")


@dataclass
class AdamState:
    step: int = 0
    m: dict[int, np.ndarray] = field(default_factory=dict)
    v: dict[int, np.ndarray] = field(default_factory=dict)


def adam_step(params: list[Tensor], state: AdamState, hyper: Hyperparams) -> None:
    """One in-place update; params without grads are skipped entirely."""
    state.step += 1
    t = state.step
    lr, b1, b2 = hyper.learning_rate, hyper.beta1, hyper.beta2
    bias1 = 1.0 - b1 ** t
    bias2 = 1.0 - b2 ** t
    for i, p in enumerate(params):
        if p.grad is None:
            continue
        g = p.grad
        if not hyper.decoupled_decay and hyper.weight_decay:
            g = g + hyper.weight_decay * p.data
        if i not in state.m:
            state.m[i] = np.zeros_like(p.data)
            state.v[i] = np.zeros_like(p.data)
        m = state.m[i]
        v = state.v[i]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        if hyper.decoupled_decay and hyper.weight_decay:
            p.data *= 1.0 - lr * hyper.weight_decay
        m_hat = m / bias1
        v_hat = v / bias2
        p.data -= lr * m_hat / (np.sqrt(v_hat) + hyper.eps)
