"""Chebyshev type II band-pass design and zero-phase application."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from ..errors import InvalidBand, SignalTooShort, UnstableDesign
from ..record_io import Signal


@dataclass(frozen=True)
class FilterCoeffs:
    b: np.ndarray
    a: np.ndarray
    order: int
    kind: str = "cheby2_bandpass"
    fs: float = 360.0
    # band-edge bookkeeping, in Hz
    passband: tuple[float, float] = (0.0, 0.0)
    stopband: tuple[float, float] = (0.0, 0.0)

    @property
    def poles(self) -> np.ndarray:
        return np.roots(self.a)

    def is_stable(self) -> bool:
        return bool(np.all(np.abs(self.poles) < 1.0))

    def response(self, freqs_hz) -> np.ndarray:
        """Complex frequency response H(e^{jw}) evaluated directly from b, a."""
        w = 2 * np.pi * np.asarray(freqs_hz, dtype=np.float64) / self.fs
        zinv = np.exp(-1j * w)
        num = np.polyval(self.b[::-1], zinv)
        den = np.polyval(self.a[::-1], zinv)
        return num / den

    def gain_db(self, freqs_hz) -> np.ndarray:
        return 20 * np.log10(np.abs(self.response(freqs_hz)))


def cheby2_prototype(order: int, stop_atten_db: float):
    """Analog low-pass prototype (zeros, poles, gain) with its stopband edge at 1 rad/s."""
    eps = 1.0 / np.sqrt(10 ** (0.1 * stop_atten_db) - 1)
    mu = np.arcsinh(1.0 / eps) / order
    k = np.arange(1, order + 1)
    theta = np.pi * (2 * k - 1) / (2 * order)
    # zeros of T_n(1/Omega): skip the one at infinity for odd order
    zk = theta[np.abs(np.cos(theta)) > 1e-12]
    zeros = 1j / np.cos(zk)
    poles = 1.0 / (-np.sinh(mu) * np.sin(theta) + 1j * np.cosh(mu) * np.cos(theta))
    gain = np.real(np.prod(-poles) / np.prod(-zeros))
    return zeros, poles, gain


def stopband_ratio(order: int, stop_atten_db: float) -> float:
    """Ratio stopband-edge / -3 dB frequency of the prototype.

    From |H|^2 = 1 / (1 + 1/(eps^2 T_n^2(ws/w))): the -3 dB point has
    eps * T_n(ws/w) = 1, so ws/w3 = cosh(acosh(1/eps) / n).
    """
    eps = 1.0 / np.sqrt(10 ** (0.1 * stop_atten_db) - 1)
    return float(np.cosh(np.arccosh(1.0 / eps) / order))


def design_cheby2_bandpass(
    fs: float = 360.0,
    f_lo: float = 0.5,
    f_hi: float = 48.0,
    order: int = 4,
    stop_atten_db: float = 40.0,
) -> FilterCoeffs:
    """Chebyshev II band-pass whose -3 dB edges sit at ``f_lo`` and ``f_hi``.

    ``order`` is the low-pass prototype order; the digital filter has
    ``2 * order`` poles. Stopband edges (where the gain first reaches
    ``-stop_atten_db``) are placed outside the passband accordingly.
    """
    if not (0 < f_lo < f_hi < fs / 2):
        raise InvalidBand(f"need 0 < f_lo < f_hi < fs/2, got {f_lo}, {f_hi} at fs={fs}")
    if order < 2 or order % 2:
        raise InvalidBand(f"order must be even and >= 2, got {order}")
    if not stop_atten_db > 0:
        raise InvalidBand("stop_atten_db must be positive")

    # prewarp the -3 dB edges, then locate the stopband edges in the analog domain
    w_lo, w_hi = (2 * fs * np.tan(np.pi * f / fs) for f in (f_lo, f_hi))
    w0sq = w_lo * w_hi
    bw3 = w_hi - w_lo
    r = stopband_ratio(order, stop_atten_db)
    s_lo = (-r * bw3 + np.sqrt((r * bw3) ** 2 + 4 * w0sq)) / 2
    s_hi = (r * bw3 + np.sqrt((r * bw3) ** 2 + 4 * w0sq)) / 2
    if s_hi >= 2 * fs * np.tan(np.pi * 0.4999):
        raise InvalidBand("upper stopband edge would fall beyond Nyquist")

    z, p, k = cheby2_prototype(order, stop_atten_db)
    # low-pass -> band-pass about the stopband edges (prototype edge is at 1)
    bw = s_hi - s_lo
    z_bp = _lp2bp_roots(z, bw, w0sq)
    p_bp = _lp2bp_roots(p, bw, w0sq)
    n_extra = len(p) - len(z)
    z_bp = np.concatenate([z_bp, np.zeros(n_extra)])
    k_bp = k * bw**n_extra

    # bilinear transform
    fs2 = 2.0 * fs
    z_d = (fs2 + z_bp) / (fs2 - z_bp)
    p_d = (fs2 + p_bp) / (fs2 - p_bp)
    z_d = np.concatenate([z_d, -np.ones(len(p_d) - len(z_d))])
    k_d = k_bp * np.real(np.prod(fs2 - z_bp) / np.prod(fs2 - p_bp))

    b = np.real(k_d * np.poly(z_d))
    a = np.real(np.poly(p_d))
    coeffs = FilterCoeffs(
        b=b,
        a=a / a[0],
        order=order,
        fs=fs,
        passband=(f_lo, f_hi),
        stopband=tuple(fs / np.pi * np.arctan(w / fs2) for w in (s_lo, s_hi)),
    )
    if not coeffs.is_stable():
        raise UnstableDesign("designed filter has poles on or outside the unit circle")
    return coeffs


def _lp2bp_roots(roots: np.ndarray, bw: float, w0sq: float) -> np.ndarray:
    half = roots * bw / 2
    disc = np.sqrt(half**2 - w0sq + 0j)
    return np.concatenate([half + disc, half - disc])


def filtfilt(c: FilterCoeffs, x: Signal) -> Signal:
    """Forward-backward application (zero phase, squared magnitude)."""
    n_order = len(c.a) - 1
    padlen = 3 * n_order
    if len(x) <= padlen:
        raise SignalTooShort(f"signal of {len(x)} samples; filtfilt needs more than {padlen}")
    y = sps.filtfilt(c.b, c.a, x.samples, padlen=padlen)
    return x.with_samples(y)


# Default design (fs 360 Hz, 0.5-48 Hz, order 4, 40 dB), frozen when first
# verified against an independent design routine. Used by the self test.
REFERENCE_B = (
    0.03793009544698587, -0.10251030778671084, 0.10264527640373566, -0.0948651624147007,
    0.11360019671262518, -0.0948651624147007, 0.1026452764037357, -0.1025103077867109,
    0.0379300954469859,
)
REFERENCE_A = (
    1.0, -5.745898865108019, 14.484747685753565, -21.066754198575403, 19.440684482946942,
    -11.678494382043347, 4.451634547327413, -0.9839465945555772, 0.09802732537894454,
)
