"""Signal conditioning: filtering, wavelet denoising, detection, segmentation."""

from .detect import BeatBounds, Delineation, lpd_delineate, pan_tompkins, segment_beats
from .filters import FilterCoeffs, design_cheby2_bandpass, filtfilt
from .pipeline import PipelineConfig, preprocess_pipeline, run_pipeline, zscore
from .wavelet import WaveletSpec, dwt_denoise

__all__ = [
    "BeatBounds",
    "Delineation",
    "FilterCoeffs",
    "PipelineConfig",
    "WaveletSpec",
    "design_cheby2_bandpass",
    "dwt_denoise",
    "filtfilt",
    "lpd_delineate",
    "pan_tompkins",
    "preprocess_pipeline",
    "run_pipeline",
    "segment_beats",
    "zscore",
]
