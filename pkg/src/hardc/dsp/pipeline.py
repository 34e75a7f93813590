"""End-to-end record -> beat dataset conditioning."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from ..errors import ConstantSignal, DataError, PipelineError, SignalTooShort
from ..record_io import BeatDataset, RawRecord, Signal
from .detect import Delineation, lpd_delineate, pan_tompkins, segment_beats
from .filters import design_cheby2_bandpass, filtfilt
from .wavelet import WaveletSpec, dwt_denoise


@dataclass(frozen=True)
class PipelineConfig:
    fs: float = 360.0
    band_lo: float = 0.5
    band_hi: float = 48.0
    filter_order: int = 4
    stop_atten_db: float = 40.0
    wavelet_moments: int = 6
    wavelet_levels: int = 9
    threshold_rule: str = "soft_universal"
    segment_width: int = 360
    label_window_s: float = 0.2
    delineate: bool = False

    @classmethod
    def from_mapping(cls, values: dict) -> "PipelineConfig":
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in types:
                raise KeyError(key)
            kwargs[key] = _coerce(raw, types[key])
        return cls(**kwargs)


def _coerce(raw, type_name: str):
    if not isinstance(raw, str):
        return raw
    if type_name == "bool":
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if type_name == "int":
        return int(raw)
    if type_name == "float":
        return float(raw)
    return raw.strip()


def zscore(x: Signal) -> Signal:
    """(x - mean) / population std."""
    if len(x) < 2:
        raise SignalTooShort("z-score needs at least 2 samples")
    mu = x.samples.mean()
    sigma = x.samples.std()
    if sigma == 0 or sigma < 1e-12 * max(1.0, abs(mu)):
        raise ConstantSignal("signal has zero standard deviation")
    return x.with_samples((x.samples - mu) / sigma)


@dataclass
class PipelineResult:
    dataset: BeatDataset
    peaks: np.ndarray  # R peaks of the emitted beats, record sample indices
    filtered: Signal
    denoised: Signal
    all_peaks: list[int]
    delineation: Delineation | None = None


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except DataError as exc:
        raise PipelineError(name, exc) from exc


def run_pipeline(rec: RawRecord, cfg: PipelineConfig = PipelineConfig()) -> PipelineResult:
    """filtfilt(cheby2) -> dwt_denoise -> pan_tompkins -> [lpd] -> segment -> z-score.

    Each emitted beat takes the label of the nearest annotation within
    ``label_window_s`` of its peak; unlabeled beats are dropped, as are
    segments with zero variance.
    """
    sig = rec.signal
    if cfg.fs != sig.fs:
        sig = Signal(sig.samples, sig.fs)  # the record's own rate wins
    coeffs = _stage(
        "filter",
        design_cheby2_bandpass,
        sig.fs,
        cfg.band_lo,
        cfg.band_hi,
        cfg.filter_order,
        cfg.stop_atten_db,
    )
    filtered = _stage("filter", filtfilt, coeffs, sig)
    wspec = WaveletSpec(
        vanishing_moments=cfg.wavelet_moments,
        levels=cfg.wavelet_levels,
        threshold_rule=cfg.threshold_rule,
    )
    denoised = _stage("denoise", dwt_denoise, filtered, wspec)
    peaks = _stage("detect", pan_tompkins, denoised)
    delineation = _stage("delineate", lpd_delineate, denoised, peaks) if cfg.delineate else None
    segs, kept = _stage("segment", segment_beats, denoised, peaks, cfg.segment_width)

    ann_idx = np.array([a[0] for a in rec.annotations], dtype=np.int64)
    ann_lab = np.array([a[1] for a in rec.annotations], dtype=np.int64)
    window = cfg.label_window_s * sig.fs
    rows, labels, used = [], [], []
    for row, p in zip(segs.beats, kept):
        if ann_idx.size == 0:
            break
        j = int(np.argmin(np.abs(ann_idx - p)))
        if abs(ann_idx[j] - p) > window:
            continue
        try:
            z = zscore(Signal(row, sig.fs)).samples
        except ConstantSignal:
            continue
        rows.append(z)
        labels.append(ann_lab[j])
        used.append(p)
    width = cfg.segment_width
    if rows:
        ds = BeatDataset(np.stack(rows), np.array(labels), width)
    else:
        ds = BeatDataset.empty(width)
    return PipelineResult(ds, np.array(used, dtype=np.int64), filtered, denoised, peaks, delineation)


def preprocess_pipeline(rec: RawRecord, cfg: PipelineConfig = PipelineConfig()) -> BeatDataset:
    return run_pipeline(rec, cfg).dataset
