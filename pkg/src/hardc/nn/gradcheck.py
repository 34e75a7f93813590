"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import Tensor


def numerical_grad(f: Callable[[], Tensor], t: Tensor, h: float = 1e-4) -> np.ndarray:
    grad = np.zeros_like(t.data)
    flat = t.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f().item()
        flat[i] = old - h
        fm = f().item()
        flat[i] = old
        gflat[i] = (fp - fm) / (2 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max |a - n| scaled by the larger of the two gradients' max magnitude."""
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0), 1e-8)
    return float(np.abs(analytic - numeric).max(initial=0.0) / scale)


def check_gradients(f: Callable[[], Tensor], tensors: dict[str, Tensor], h: float = 1e-4) -> dict[str, float]:
    """Relative error per tensor between backward() and central differences.

    ``f`` must rebuild the graph on every call and return a scalar Tensor.
    """
    for t in tensors.values():
        t.requires_grad = True
        t.grad = None
    loss = f()
    loss.backward()
    analytic = {k: (t.grad if t.grad is not None else np.zeros_like(t.data)) for k, t in tensors.items()}
    return {k: relative_error(analytic[k], numerical_grad(f, t, h)) for k, t in tensors.items()}
