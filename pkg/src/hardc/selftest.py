"""Fast in-process invariant checks, run by ``hardc selftest``."""

from __future__ import annotations

import math
import time
from typing import Callable

import numpy as np


def _cheby2_golden():
    from .dsp.filters import REFERENCE_A, REFERENCE_B, design_cheby2_bandpass

    c = design_cheby2_bandpass()
    err = max(np.abs(c.b - REFERENCE_B).max(), np.abs(c.a - REFERENCE_A).max())
    return err < 1e-9, f"max coefficient error {err:.2e}"


def _wavelet_pr():
    from .dsp.wavelet import wavedec, waverec

    rng = np.random.default_rng(0)
    worst = 0.0
    for n in (64, 256, 1024):
        x = rng.standard_normal(n)
        y = waverec(wavedec(x, 6, 4), 6)
        worst = max(worst, np.linalg.norm(y - x) / np.linalg.norm(x))
    return worst < 1e-8, f"relative error {worst:.2e}"


def _detector():
    from .dsp.detect import pan_tompkins
    from .synthetic import synthetic_ecg

    rec = synthetic_ecg(60, 72, seed=0)
    found = np.array(pan_tompkins(rec.record.signal))
    ok = len(found) == 60 and np.abs(found - rec.r_peaks).max() <= 2
    return ok, f"{len(found)} peaks detected of 60"


def _softmax_ce():
    from .nn.layers import cross_entropy, softmax
    from .nn.tensor import Tensor

    p = softmax(Tensor([1.0, 2.0, 3.0])).data
    ok = np.abs(p - [0.090031, 0.244728, 0.665241]).max() < 1e-6
    ce = float(cross_entropy(Tensor([0.7, 0.2, 0.1]), 0).data)
    ok &= abs(ce - 0.356675) < 1e-6
    return bool(ok), f"softmax {np.round(p, 6).tolist()}, ce {ce:.6f}"


def _conv_oracle():
    from .nn.layers import conv1d_dilated
    from .nn.tensor import Tensor

    y = conv1d_dilated(Tensor([[1.0], [2.0], [3.0], [4.0]]), Tensor([[[1.0, 1.0]]]), 2).data.ravel()
    return bool(np.array_equal(y, [1, 2, 4, 6])), f"{y.tolist()}"


def _gradients():
    from .model.network import build_model
    from .model.spec import ModelSpec
    from .nn.gradcheck import check_gradients
    from .nn.layers import cross_entropy

    spec = ModelSpec(
        segment_len=16, rnn_units_block1=2, rnn_units_block2=0, conv_blocks=2,
        kernel_width=2, filters=3, target_convs=3, attention_dim=4, classes=3,
    )
    m = build_model(spec, 0)
    x = np.random.default_rng(1).standard_normal((3, 16))

    # training-mode graph (batch statistics, fixed dropout mask): the one training differentiates
    def loss():
        return cross_entropy(m.forward(x, training=True, rng=np.random.default_rng(5)), [0, 1, 2])

    errs = check_gradients(loss, m.params)
    worst = max(errs.values())
    return worst < 1e-4, f"max relative error {worst:.2e}"


def _routing():
    from .model.network import RoutingTrace, routing
    from .nn.tensor import Tensor

    rng = np.random.default_rng(2)
    tr = RoutingTrace()
    cv = routing(Tensor(rng.standard_normal((7, 4))), Tensor(rng.standard_normal((3, 4, 5))), 3, tr)
    rows = max(np.abs(c.sum(axis=1) - 1).max() for c in tr.couplings)
    norm = np.linalg.norm(cv.data, axis=1).max()
    return rows < 1e-9 and norm < 1, f"row-sum error {rows:.1e}, max |cv| {norm:.4f}"


def _metrics():
    from .metrics import ClassMetrics

    m = ClassMetrics.from_counts(8, 2, 1, 9)
    want = (0.85, 0.8, 0.888889, 0.818182, 0.842105)
    err = max(abs(a - b) for a, b in zip(m.values(), want))
    return err < 1e-6, f"max deviation {err:.1e}"


def _receptive_field():
    from .model.network import measure_receptive_field
    from .model.spec import ModelSpec, receptive_field

    out = []
    for w, lv in ((2, 1), (5, 2), (8, 3)):
        s = ModelSpec(kernel_width=w, conv_blocks=lv)
        out.append((receptive_field(s), measure_receptive_field(s)))
    return all(a == b for a, b in out), str(out)


def _gan_loss():
    from .cgan import gan_losses

    ld, _ = gan_losses(np.full(4, 0.5), np.full(4, 0.5))
    err = abs(float(ld.data) - 2 * math.log(2))
    return err < 1e-12, f"error {err:.1e}"


CHECKS: list[tuple[str, Callable[[], tuple[bool, str]]]] = [
    ("cheby2 golden coefficients", _cheby2_golden),
    ("wavelet perfect reconstruction", _wavelet_pr),
    ("R-peak detection", _detector),
    ("softmax / cross-entropy oracles", _softmax_ce),
    ("dilated conv oracle", _conv_oracle),
    ("micro-model gradient check", _gradients),
    ("routing invariants", _routing),
    ("metric oracle", _metrics),
    ("receptive field", _receptive_field),
    ("GAN loss at 0.5", _gan_loss),
]


def run_selftest(out=print) -> bool:
    ok_all = True
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # report and keep going
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        ok_all &= bool(ok)
        out(f"{'PASS' if ok else 'FAIL'}  {name:<32} {detail}  ({time.perf_counter() - t0:.2f}s)")
    return ok_all
