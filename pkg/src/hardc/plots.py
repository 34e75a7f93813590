"""Report figures, rendered off-screen to PNG files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .record_io import CLASS_NAMES, BeatDataset  # noqa: E402

_META = {"Software": None}  # keeps PNG bytes free of version strings


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)


def plot_preprocessing(raw, filtered, denoised, peaks, fs: float, path, seconds: float = 6.0) -> None:
    """Raw, band-passed and wavelet-denoised traces with detected R peaks."""
    n = min(len(raw), int(seconds * fs))
    t = np.arange(n) / fs
    fig, axes = plt.subplots(3, 1, figsize=(10, 6), sharex=True)
    for ax, sig, title in zip(axes, (raw, filtered, denoised), ("raw", "band-pass", "denoised")):
        ax.plot(t, sig[:n], lw=0.8)
        ax.set_ylabel(title)
    pk = np.asarray([p for p in peaks if p < n], dtype=int)
    axes[2].plot(pk / fs, np.asarray(denoised)[pk], "rv", ms=5, label="R peak")
    axes[2].legend(loc="upper right")
    axes[2].set_xlabel("time (s)")
    _save(fig, path)


def plot_beats(real: BeatDataset, path, synthetic: BeatDataset | None = None, per_class: int = 5) -> None:
    """Example beats per class; synthetic ones dashed when given."""
    fig, axes = plt.subplots(1, len(CLASS_NAMES), figsize=(3 * len(CLASS_NAMES), 3), sharey=True)
    for c, ax in enumerate(axes):
        for ds, style in ((real, "-"), (synthetic, "--")):
            if ds is None:
                continue
            rows = ds.beats[ds.labels == c][:per_class]
            for row in rows:
                ax.plot(row, style, lw=0.8)
        ax.set_title(CLASS_NAMES[c])
    _save(fig, path)


def plot_history(history, path, labels=("loss", "accuracy")) -> None:
    h = np.asarray(history, dtype=float).reshape(-1, 2)
    ep = np.arange(1, len(h) + 1)
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    for i, ax in enumerate(axes):
        ax.plot(ep, h[:, i], marker="o", ms=3)
        ax.set_xlabel("epoch")
        ax.set_ylabel(labels[i])
    _save(fig, path)


def plot_confusion(counts, path, class_names=CLASS_NAMES) -> None:
    counts = np.asarray(counts)
    fig, ax = plt.subplots(figsize=(5, 4.5))
    ax.imshow(counts, cmap="Blues")
    for (i, j), v in np.ndenumerate(counts):
        ax.text(j, i, str(v), ha="center", va="center", fontsize=8)
    ax.set_xticks(range(len(class_names)), class_names)
    ax.set_yticks(range(len(class_names)), class_names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    _save(fig, path)


def plot_metrics(report, path) -> None:
    """Grouped bars of every per-class metric."""
    from .metrics import METRIC_FIELDS

    vals = np.array([m.values() for m in report.per_class])
    x = np.arange(len(report.class_names))
    width = 0.8 / len(METRIC_FIELDS)
    fig, ax = plt.subplots(figsize=(8, 3.5))
    for i, name in enumerate(METRIC_FIELDS):
        ax.bar(x + i * width, vals[:, i], width, label=name)
    ax.set_xticks(x + 0.4 - width / 2, report.class_names)
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=7, ncol=len(METRIC_FIELDS))
    _save(fig, path)


def plot_correlation(corr, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4.5))
    im = ax.imshow(corr, cmap="coolwarm", vmin=-1, vmax=1)
    fig.colorbar(im, ax=ax)
    ax.set_xlabel("sample index")
    ax.set_ylabel("sample index")
    _save(fig, path)
