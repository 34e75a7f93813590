"""Daubechies filters and periodized multilevel DWT denoising."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np
from numpy.polynomial import polynomial as P

from ..errors import SignalTooShort
from ..record_io import Signal


@dataclass(frozen=True)
class WaveletSpec:
    family: str = "daubechies"
    vanishing_moments: int = 6
    levels: int = 9
    threshold_rule: str = "soft_universal"

    def __post_init__(self):
        if self.family != "daubechies":
            raise ValueError(f"unsupported wavelet family {self.family!r}")
        if self.vanishing_moments < 1 or self.levels < 1:
            raise ValueError("vanishing_moments and levels must be positive")
        if self.threshold_rule not in ("soft_universal", "none"):
            raise ValueError(f"unknown threshold rule {self.threshold_rule!r}")


def daubechies_poly(n_moments: int) -> np.ndarray:
    """Coefficients of P_N(y) = sum_{k<N} C(N-1+k, k) y^k, lowest power first."""
    return np.array([comb(n_moments - 1 + k, k) for k in range(n_moments)], dtype=np.float64)


@lru_cache(maxsize=None)
def _lowpass(n_moments: int) -> tuple[float, ...]:
    N = n_moments
    if N == 1:
        return (1 / np.sqrt(2), 1 / np.sqrt(2))
    # substitute y = (2 - z - 1/z)/4 and clear denominators with z^(N-1)
    zy = np.array([-0.25, 0.5, -0.25])
    poly = np.zeros(2 * N - 1)
    for k, coef in enumerate(daubechies_poly(N)):
        term = np.array([1.0])
        for _ in range(k):
            term = P.polymul(term, zy)
        term = P.polymul(term, np.r_[np.zeros(N - 1 - k), 1.0])
        poly[: term.size] += coef * term
    roots = P.polyroots(poly)
    # minimum-phase spectral factor: keep the roots inside the unit circle
    inside = roots[np.abs(roots) < 1]
    h = np.real(np.poly(np.concatenate([-np.ones(N), inside])))
    h = h / h.sum() * np.sqrt(2)
    return tuple(h)


def daubechies_filters(n_moments: int) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal (low-pass, high-pass) reconstruction filters for dbN."""
    h = np.array(_lowpass(n_moments))
    g = h[::-1] * (-1.0) ** np.arange(h.size)
    return h, g


def _analysis(x: np.ndarray, h: np.ndarray, g: np.ndarray):
    n = x.size
    idx = (2 * np.arange(n // 2)[:, None] + np.arange(h.size)[None, :]) % n
    win = x[idx]
    return win @ h, win @ g


def _synthesis(a: np.ndarray, d: np.ndarray, h: np.ndarray, g: np.ndarray) -> np.ndarray:
    n = 2 * a.size
    out = np.zeros(n)
    idx = (2 * np.arange(a.size)[:, None] + np.arange(h.size)[None, :]) % n
    np.add.at(out, idx, a[:, None] * h[None, :] + d[:, None] * g[None, :])
    return out


def wavedec(x: np.ndarray, n_moments: int, levels: int) -> list[np.ndarray]:
    """Periodized decomposition; returns [cA_J, cD_J, ..., cD_1]. len(x) % 2**levels == 0."""
    h, g = daubechies_filters(n_moments)
    details = []
    a = np.asarray(x, dtype=np.float64)
    for _ in range(levels):
        a, d = _analysis(a, h, g)
        details.append(d)
    return [a] + details[::-1]


def waverec(coeffs: list[np.ndarray], n_moments: int) -> np.ndarray:
    h, g = daubechies_filters(n_moments)
    a = coeffs[0]
    for d in coeffs[1:]:
        a = _synthesis(a, d, h, g)
    return a


def soft_threshold(c: np.ndarray, lam: float) -> np.ndarray:
    return np.sign(c) * np.maximum(np.abs(c) - lam, 0.0)


def dwt_denoise(x: Signal, w: WaveletSpec = WaveletSpec()) -> Signal:
    """Multilevel DWT, soft universal threshold on all detail bands, inverse DWT.

    Lengths that are not a multiple of 2**levels are symmetrically extended
    before the transform and cropped afterwards.
    """
    n = len(x)
    block = 2**w.levels
    if n < block:
        raise SignalTooShort(f"{n} samples; {w.levels} levels need at least {block}")
    pad = (-n) % block
    # padded length is < 2n, so a single reflection always suffices
    ext = np.concatenate([x.samples, x.samples[::-1][:pad]]) if pad else x.samples
    coeffs = wavedec(ext, w.vanishing_moments, w.levels)
    if w.threshold_rule == "soft_universal":
        finest = coeffs[-1]
        sigma = np.median(np.abs(finest)) / 0.6745
        lam = sigma * np.sqrt(2 * np.log(n))
        coeffs = [coeffs[0]] + [soft_threshold(d, lam) for d in coeffs[1:]]
    y = waverec(coeffs, w.vanishing_moments)[:n]
    return x.with_samples(y)
