"""R-peak detection (Pan-Tompkins), LPD delineation, and beat segmentation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from ..errors import SignalTooShort
from ..record_io import BeatDataset, Signal

REFRACTORY_S = 0.200
INTEGRATION_S = 0.150
T_WAVE_S = 0.360
SEARCH_S = 0.150


def _bandpass_5_15(x: np.ndarray, fs: float) -> np.ndarray:
    hi = min(15.0, 0.45 * fs)
    sos = sps.butter(2, [5.0, hi], btype="band", fs=fs, output="sos")
    return sps.sosfiltfilt(sos, x)


def _five_point_derivative(x: np.ndarray, fs: float) -> np.ndarray:
    # y[n] = (1/8T)(-x[n-2] - 2x[n-1] + 2x[n+1] + x[n+2]), centred so no delay
    kernel = np.array([1.0, 2.0, 0.0, -2.0, -1.0]) * fs / 8.0
    return np.convolve(x, kernel, mode="same")


def pan_tompkins(x: Signal) -> list[int]:
    """QRS detection: band-pass, derivative, squaring, moving-window integration,
    then adaptive dual thresholds with search-back and 200 ms refractory blanking.

    Returned indices point at the R peak (largest deviation of the input
    within the QRS search window).
    """
    fs = x.fs
    sig = x.samples
    if fs < 100:
        raise SignalTooShort(f"sampling rate {fs} Hz below the 100 Hz minimum")
    if len(x) < int(2 * fs):
        raise SignalTooShort(f"{len(x)} samples is shorter than 2 s at {fs} Hz")
    if not np.any(sig - np.median(sig)):
        return []

    bp = _bandpass_5_15(sig, fs)
    der = _five_point_derivative(bp, fs)
    sq = der**2
    win = max(1, int(round(INTEGRATION_S * fs)))
    mwi = np.convolve(sq, np.ones(win) / win, mode="same")
    if mwi.max() <= 1e-12 * max(1.0, float(np.abs(sig).max()) ** 2):
        return []

    refractory = int(round(REFRACTORY_S * fs))
    cands, _ = sps.find_peaks(mwi, distance=refractory)
    if cands.size == 0:
        return []

    learn = mwi[: int(2 * fs)]
    spki = 0.25 * learn.max()
    npki = 0.5 * learn.mean()
    thr1 = npki + 0.25 * (spki - npki)

    qrs: list[int] = []
    rr: list[int] = []
    noise_buf: list[int] = []
    last_slope = None

    def slope_at(i: int) -> float:
        lo, hi = max(0, i - win), min(len(der), i + 1)
        return float(np.abs(der[lo:hi]).max())

    for c in cands:
        peak = mwi[c]
        if qrs and c - qrs[-1] < refractory:
            continue
        is_qrs = peak > thr1
        if is_qrs and qrs and c - qrs[-1] < T_WAVE_S * fs and last_slope is not None:
            # T-wave discrimination: much shallower slope than the last QRS
            if slope_at(c) < 0.5 * last_slope:
                is_qrs = False
        if is_qrs:
            if qrs:
                rr.append(c - qrs[-1])
                rr_avg = np.mean(rr[-8:])
                if c - qrs[-1] > 1.66 * rr_avg and noise_buf:
                    # search back for a missed beat among the noise peaks
                    thr2 = 0.5 * thr1
                    between = [n for n in noise_buf if qrs[-1] + refractory <= n <= c - refractory]
                    strong = [n for n in between if mwi[n] > thr2]
                    if strong:
                        best = max(strong, key=lambda n: mwi[n])
                        qrs.append(best)
                        spki = 0.25 * mwi[best] + 0.75 * spki
            qrs.append(int(c))
            last_slope = slope_at(c)
            spki = 0.125 * peak + 0.875 * spki
            noise_buf = []
        else:
            npki = 0.125 * peak + 0.875 * npki
            noise_buf.append(int(c))
        thr1 = npki + 0.25 * (spki - npki)

    qrs.sort()
    return _refine_r_peaks(sig, qrs, fs, refractory)


def _refine_r_peaks(sig: np.ndarray, mwi_peaks: list[int], fs: float, refractory: int) -> list[int]:
    half = int(round(SEARCH_S * fs))
    base = np.median(sig)
    out: list[int] = []
    for p in mwi_peaks:
        lo, hi = max(0, p - half), min(len(sig), p + half + 1)
        seg = sig[lo:hi] - base
        r = lo + int(np.argmax(np.abs(seg)))
        if out and r - out[-1] < refractory:
            if abs(sig[r] - base) > abs(sig[out[-1]] - base):
                out[-1] = r
            continue
        out.append(r)
    return out


@dataclass
class BeatBounds:
    qrs_onset: int
    r_peak: int
    qrs_offset: int
    p_onset: int | None = None
    p_offset: int | None = None
    t_onset: int | None = None
    t_offset: int | None = None
    carried: bool = False  # boundaries copied from the previous beat


@dataclass
class Delineation:
    beats: list[BeatBounds]

    def __len__(self) -> int:
        return len(self.beats)


def low_pass_differentiator(x: np.ndarray, fs: float, cutoff: float = 40.0) -> np.ndarray:
    """Slope signal: zero-phase low-pass followed by a central difference."""
    cutoff = min(cutoff, 0.45 * fs)
    sos = sps.butter(2, cutoff, btype="low", fs=fs, output="sos")
    lp = sps.sosfiltfilt(sos, x)
    return np.gradient(lp) * fs


def lpd_delineate(
    x: Signal,
    peaks,
    k_on: float = 5.0,
    k_off: float = 5.0,
    search_s: float = 0.12,
) -> Delineation:
    """QRS onset/offset by scanning the LPD slope signal away from each peak.

    For each peak the slope extremum on either side is found within
    ``search_s``; the boundary is the first sample beyond it where
    ``|slope|`` drops below ``extremum / k``. A beat whose boundaries cannot
    be located inherits the previous beat's onset/offset distances
    (``QRS(l) = QRS(l-1)``); without a predecessor it is omitted.
    """
    peaks = [int(p) for p in peaks]
    if not peaks:
        return Delineation([])
    fs = x.fs
    sig = x.samples
    d = low_pass_differentiator(sig, fs)
    n = len(sig)
    span = max(2, int(round(search_s * fs)))
    zc_win = max(1, int(round(0.02 * fs)))
    out: list[BeatBounds] = []
    prev: tuple[int, int] | None = None
    for p in peaks:
        r = _zero_crossing_peak(d, sig, p, zc_win)
        bounds = _scan_bounds(d, r, span, k_on, k_off, n)
        if bounds is None:
            if prev is None:
                continue
            on, off = r - prev[0], r + prev[1]
            if not (0 <= on < r < off < n):
                continue
            out.append(BeatBounds(on, r, off, carried=True))
            continue
        on, off = bounds
        prev = (r - on, off - r)
        out.append(BeatBounds(on, r, off))
    return Delineation(out)


def _zero_crossing_peak(d: np.ndarray, sig: np.ndarray, p: int, win: int) -> int:
    """Snap p to the nearest slope sign change that matches the peak polarity."""
    lo, hi = max(1, p - win), min(len(d) - 1, p + win)
    base = np.median(sig)
    up = sig[p] >= base
    best, best_dist = p, None
    for i in range(lo, hi + 1):
        if up and d[i - 1] > 0 >= d[i] or (not up and d[i - 1] < 0 <= d[i]):
            cand = i if abs(d[i]) < abs(d[i - 1]) else i - 1
            dist = abs(cand - p)
            if best_dist is None or dist < best_dist:
                best, best_dist = cand, dist
    return best


def _scan_bounds(d, r, span, k_on, k_off, n):
    lo = max(0, r - span)
    hi = min(n, r + span + 1)
    if r - lo < 2 or hi - r < 3:
        return None
    left = np.abs(d[lo:r])
    right = np.abs(d[r + 1 : hi])
    i_on = lo + int(np.argmax(left))
    i_off = r + 1 + int(np.argmax(right))
    thr_on = np.abs(d[i_on]) / k_on
    thr_off = np.abs(d[i_off]) / k_off
    if thr_on <= 0 or thr_off <= 0:
        return None
    on = None
    for i in range(i_on, lo - 1, -1):
        if abs(d[i]) < thr_on:
            on = i
            break
    off = None
    for i in range(i_off, hi):
        if abs(d[i]) < thr_off:
            off = i
            break
    if on is None or off is None or not on < r < off:
        return None
    return on, off


def segment_beats(x: Signal, peaks, width: int = 360) -> tuple[BeatDataset, np.ndarray]:
    """Cut [p - width/2, p + width/2) windows; peaks too close to the edges are skipped.

    Returns the unlabeled segments (labels zero-filled) and the peaks that
    were kept, in order.
    """
    if width <= 0 or width % 2:
        raise ValueError(f"segment width must be a positive even integer, got {width}")
    if width > len(x):
        raise SignalTooShort(f"segment width {width} exceeds signal length {len(x)}")
    half = width // 2
    kept = [int(p) for p in peaks if p - half >= 0 and p + half <= len(x)]
    if not kept:
        return BeatDataset.empty(width), np.zeros(0, dtype=np.int64)
    rows = np.stack([x.samples[p - half : p + half] for p in kept])
    return BeatDataset(rows, np.zeros(len(kept), dtype=np.int64), width), np.array(kept)
