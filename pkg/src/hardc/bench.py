"""Forward-pass timing: dilated conv stack vs one dense conv of equal receptive field."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .model.spec import ModelSpec, dilations, receptive_field
from .nn.layers import conv1d_forward_numpy


@dataclass(frozen=True)
class BenchResult:
    width: int
    levels: int
    receptive_field: int
    channels: int
    length: int
    iters: int
    dilated_s: float
    dense_s: float

    @property
    def ratio(self) -> float:
        """dense time / dilated time; above 1 means the dilated stack is faster."""
        return self.dense_s / self.dilated_s

    def csv(self) -> str:
        head = "width,levels,receptive_field,channels,length,iters,dilated_s,dense_s,ratio"
        row = (
            f"{self.width},{self.levels},{self.receptive_field},{self.channels},{self.length},"
            f"{self.iters},{self.dilated_s:.6f},{self.dense_s:.6f},{self.ratio:.4f}"
        )
        return head + "\n" + row + "\n"


def _time(fn, iters: int, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(iters):
            fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_bench(
    width: int = 8,
    levels: int = 3,
    channels: int = 32,
    length: int = 360,
    iters: int = 1000,
    repeats: int = 3,
    seed: int = 0,
) -> BenchResult:
    """Time ``iters`` forward passes of each network, best of ``repeats``.

    Both map [1, length, channels] to the same shape with causal padding;
    the dense conv's kernel spans the stack's whole receptive field.
    """
    spec = ModelSpec(conv_blocks=levels, kernel_width=width)
    rf = receptive_field(spec)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((1, length, channels))
    stack = [(rng.standard_normal((channels, channels, width)) / np.sqrt(channels * width), d) for d in dilations(spec)]
    dense_w = rng.standard_normal((channels, channels, rf)) / np.sqrt(channels * rf)

    def dilated():
        h = x
        for w, d in stack:
            h = conv1d_forward_numpy(h, w, d)
        return h

    def dense():
        return conv1d_forward_numpy(x, dense_w, 1)

    dilated()
    dense()
    return BenchResult(
        width, levels, rf, channels, length, iters,
        _time(dilated, iters, repeats),
        _time(dense, iters, repeats),
    )
