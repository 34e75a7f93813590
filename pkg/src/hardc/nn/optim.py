"""Adam with bias correction and an L2 penalty folded into the gradient."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatch
from .tensor import Tensor


def to_f32(a: np.ndarray) -> np.ndarray:
    """Round to the nearest float32 value, kept in float64 storage."""
    return np.asarray(a, dtype=np.float32).astype(np.float64)


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    l2: float = 1e-3
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(state: AdamState, params: dict[str, Tensor], grads: dict[str, np.ndarray] | None = None) -> None:
    """One update of every parameter in ``params`` (in place).

    ``grads`` defaults to each tensor's ``.grad``; a missing gradient counts
    as zero. The penalty contributes ``2 * l2 * theta`` to the gradient.
    """
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1 - b1**state.t
    c2 = 1 - b2**state.t
    for name, p in params.items():
        g = grads.get(name) if grads is not None else p.grad
        if g is None:
            g = np.zeros_like(p.data)
        if g.shape != p.shape:
            raise ShapeMismatch(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        if state.l2:
            g = g + 2 * state.l2 * p.data
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        step = state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p.data = to_f32(p.data - step)
