"""Dense tensors with reverse-mode automatic differentiation.

Each differentiable op produces a Tensor holding a backward closure and
references to its parents; backward() walks the implied tape once in
reverse topological order.  Gradients accumulate into .grad, including on
intermediates, which saliency extraction relies on.
"""

from __future__ import annotations

import contextlib

import numpy as np

_GRAD_ENABLED = True
_DEBUG_NAN = False


def set_debug_nan_checks(on: bool) -> None:
    """When on, every op asserts its output is finite (slow; for debugging)."""
    global _DEBUG_NAN
    _DEBUG_NAN = on


@contextlib.contextmanager
def no_grad():
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        self.data = np.asarray(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.data.shape}, dtype={self.data.dtype})"

    def accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, gradient: np.ndarray | None = None) -> None:
        if gradient is None:
            if self.data.size != 1:
                raise ValueError("backward() without gradient needs a scalar")
            gradient = np.ones_like(self.data)
        # iterative topological order over the graph reachable from self
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self.accumulate(gradient)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward()


def make_result(data: np.ndarray, parents: tuple[Tensor, ...]) -> Tensor:
    """Wrap an op output, attaching tape links only when grads are on.

    The op assigns out._backward afterwards (the closure needs the result
    object to read out.grad); skip that when out.requires_grad is False.
    """
    if _DEBUG_NAN and not np.all(np.isfinite(data)):
        raise FloatingPointError("non-finite values in op output")
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
    return out


def parameter(data, name: str = "") -> Tensor:
    t = Tensor(np.asarray(data), requires_grad=True, name=name)
    return t
