"""Minimal reverse-mode tape over float64 numpy arrays.

Each op builds a Var holding the forward value and a closure that routes
the output adjoint into the parents. `backward` runs the closures in
reverse topological order. Only the dozen ops the decoder needs exist;
masked positions in the causal softmax receive exactly zero probability
and zero gradient, which is what makes decoder causality bitwise.
"""

from __future__ import annotations

import numpy as np


class Var:
    __slots__ = ("value", "grad", "parents", "_push")

    def __init__(self, value, parents=(), push=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self._push = push

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        self.grad += g


def backward(root: Var) -> None:
    """Reverse pass from a scalar root; leaf .grad fields accumulate."""
    if root.value.shape != ():
        raise ValueError("backward needs a scalar root")
    topo: list[Var] = []
    seen: set[int] = set()
    stack: list[tuple[Var, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    root.grad = np.array(1.0)
    for node in reversed(topo):
        if node._push is not None and node.grad is not None:
            node._push(node.grad)


def add(a: Var, b: Var) -> Var:
    out = Var(a.value + b.value, (a, b))
    out._push = lambda g: (a.accumulate(g), b.accumulate(g))
    return out


def add_row(a: Var, bias: Var) -> Var:
    """(T, F) + (F,) broadcast; bias adjoint sums over rows."""
    out = Var(a.value + bias.value, (a, bias))
    out._push = lambda g: (a.accumulate(g), bias.accumulate(g.sum(axis=0)))
    return out


def matmul(a: Var, b: Var) -> Var:
    out = Var(a.value @ b.value, (a, b))
    out._push = lambda g: (a.accumulate(g @ b.value.T), b.accumulate(a.value.T @ g))
    return out


def matmul_nt(a: Var, b: Var) -> Var:
    """a @ b.T without materializing a transpose node."""
    out = Var(a.value @ b.value.T, (a, b))
    out._push = lambda g: (a.accumulate(g @ b.value), b.accumulate(g.T @ a.value))
    return out


def scale(a: Var, c: float) -> Var:
    out = Var(a.value * c, (a,))
    out._push = lambda g: a.accumulate(g * c)
    return out


def tanh(a: Var) -> Var:
    t = np.tanh(a.value)
    out = Var(t, (a,))
    out._push = lambda g: a.accumulate(g * (1.0 - t * t))
    return out


def causal_softmax(scores: Var) -> Var:
    """Row softmax over positions j <= i; future positions get exact 0."""
    s = scores.value
    t = s.shape[0]
    allowed = np.tril(np.ones((t, t), dtype=bool))
    masked = np.where(allowed, s, -np.inf)
    m = masked.max(axis=1, keepdims=True)
    e = np.exp(masked - m)
    p = e / e.sum(axis=1, keepdims=True)
    out = Var(p, (scores,))

    def push(g):
        dot = (g * p).sum(axis=1, keepdims=True)
        scores.accumulate(p * (g - dot))

    out._push = push
    return out


def slice_cols(a: Var, lo: int, hi: int) -> Var:
    out = Var(a.value[:, lo:hi], (a,))

    def push(g):
        if a.grad is None:
            a.grad = np.zeros_like(a.value)
        a.grad[:, lo:hi] += g

    out._push = push
    return out


def slice_rows(a: Var, t: int) -> Var:
    out = Var(a.value[:t], (a,))

    def push(g):
        if a.grad is None:
            a.grad = np.zeros_like(a.value)
        a.grad[:t] += g

    out._push = push
    return out


def concat_cols(parts: list[Var]) -> Var:
    if len(parts) == 1:
        return parts[0]
    out = Var(np.concatenate([p.value for p in parts], axis=1), tuple(parts))
    widths = [p.value.shape[1] for p in parts]

    def push(g):
        lo = 0
        for p, w in zip(parts, widths):
            p.accumulate(g[:, lo : lo + w])
            lo += w

    out._push = push
    return out


def sse(a: Var, target: np.ndarray) -> Var:
    """Sum of squared errors against a constant target."""
    diff = a.value - target
    out = Var(np.array((diff * diff).sum()), (a,))
    out._push = lambda g: a.accumulate(2.0 * diff * g)
    return out


def const_zero() -> Var:
    return Var(np.array(0.0))
