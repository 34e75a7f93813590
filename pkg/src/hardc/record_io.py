"""On-disk formats: beat CSV, text raw records, and stratified splitting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientClass, ParseError

CLASS_NAMES = ("N", "FN", "PVC", "AP", "FVN")
CLASS_CODES = {name: code for code, name in enumerate(CLASS_NAMES)}
N_CLASSES = len(CLASS_NAMES)

# Full names as listed for the MIT-BIH derived beat corpus.
CLASS_DESCRIPTIONS = (
    "Normal",
    "Fusion of paced and normal",
    "Premature ventricular contraction",
    "Atrial premature",
    "Fusion of ventricular and normal",
)

# Beats per class in that corpus (109,446 in total).
CORPUS_CLASS_COUNTS = (90589, 8039, 7236, 2779, 803)


def class_name(code: int) -> str:
    if not 0 <= code < N_CLASSES:
        raise ValueError(f"class code {code} outside 0..{N_CLASSES - 1}")
    return CLASS_NAMES[code]


def class_code(name: str) -> int:
    return CLASS_CODES[name]


@dataclass(frozen=True)
class Signal:
    samples: np.ndarray
    fs: float = 360.0

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.float64))
        if self.samples.ndim != 1:
            raise ValueError("Signal samples must be one-dimensional")
        if not self.fs > 0:
            raise ValueError(f"sampling rate must be positive, got {self.fs}")

    def __len__(self) -> int:
        return self.samples.shape[0]

    def with_samples(self, samples) -> "Signal":
        return Signal(samples, self.fs)


@dataclass(frozen=True)
class RawRecord:
    signal: Signal
    annotations: list[tuple[int, int]] = field(default_factory=list)


@dataclass
class BeatDataset:
    beats: np.ndarray
    labels: np.ndarray
    segment_len: int | None = None

    def __post_init__(self):
        self.beats = np.asarray(self.beats, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.beats.ndim == 1 and self.beats.size == 0:
            self.beats = self.beats.reshape(0, self.segment_len or 0)
        if self.beats.ndim != 2:
            raise ValueError("beats must be a 2-D matrix")
        if self.segment_len is None:
            self.segment_len = self.beats.shape[1]
        if self.beats.shape[1] != self.segment_len:
            raise ValueError(
                f"rows have length {self.beats.shape[1]}, expected {self.segment_len}"
            )
        if self.labels.shape != (self.beats.shape[0],):
            raise ValueError("labels length must equal number of beats")

    def __len__(self) -> int:
        return self.beats.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, BeatDataset):
            return NotImplemented
        return (
            self.segment_len == other.segment_len
            and np.array_equal(self.beats, other.beats)
            and np.array_equal(self.labels, other.labels)
        )

    def class_counts(self, n_classes: int = N_CLASSES) -> np.ndarray:
        return np.bincount(self.labels, minlength=n_classes)

    def subset(self, idx) -> "BeatDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return BeatDataset(self.beats[idx], self.labels[idx], self.segment_len)

    @staticmethod
    def empty(segment_len: int = 0) -> "BeatDataset":
        return BeatDataset(np.zeros((0, segment_len)), np.zeros(0, dtype=np.int64), segment_len)

    @staticmethod
    def concat(parts: list["BeatDataset"]) -> "BeatDataset":
        parts = list(parts)
        seg = parts[0].segment_len
        return BeatDataset(
            np.concatenate([p.beats for p in parts], axis=0),
            np.concatenate([p.labels for p in parts]),
            seg,
        )


def _decode(data: bytes | str) -> str:
    if isinstance(data, bytes):
        try:
            return data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(1, f"not UTF-8 text ({exc.reason})") from None
    return data


def parse_beat_csv(data: bytes | str, expected_len: int) -> BeatDataset:
    """Parse headerless beat rows: ``expected_len`` samples then an integer label."""
    text = _decode(data)
    rows: list[list[float]] = []
    labels: list[int] = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.strip()
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != expected_len + 1:
            raise ParseError(
                lineno, f"expected {expected_len + 1} fields, found {len(fields)}"
            )
        try:
            values = [float(f) for f in fields[:-1]]
        except ValueError:
            raise ParseError(lineno, "non-numeric sample value") from None
        if not all(math.isfinite(v) for v in values):
            raise ParseError(lineno, "non-finite sample value")
        raw_label = fields[-1].strip()
        try:
            label = int(raw_label)
        except ValueError:
            # tolerate "3.0"-style labels written by float-only tools
            try:
                as_float = float(raw_label)
            except ValueError:
                raise ParseError(lineno, f"label {raw_label!r} is not an integer") from None
            if not as_float.is_integer():
                raise ParseError(lineno, f"label {raw_label!r} is not an integer")
            label = int(as_float)
        if not 0 <= label < N_CLASSES:
            raise ParseError(lineno, f"label {label} outside 0..{N_CLASSES - 1}")
        rows.append(values)
        labels.append(label)
    if not rows:
        return BeatDataset.empty(expected_len)
    return BeatDataset(np.array(rows), np.array(labels), expected_len)


def write_beat_csv(ds: BeatDataset) -> bytes:
    lines = []
    for row, label in zip(ds.beats, ds.labels):
        lines.append(",".join("%.9g" % v for v in row) + f",{int(label)}\n")
    return "".join(lines).encode("utf-8")


def read_beat_csv(path, expected_len: int) -> BeatDataset:
    with open(path, "rb") as fh:
        return parse_beat_csv(fh.read(), expected_len)


def sniff_segment_len(data: bytes | str) -> int:
    """Infer segment length from the first non-empty row (fields minus the label)."""
    for line in _decode(data).split("\n"):
        if line.strip():
            return len(line.split(",")) - 1
    return 0


def parse_raw_record(samples_bytes: bytes | str, ann_bytes: bytes | str) -> RawRecord:
    text = _decode(samples_bytes)
    lines = text.split("\n")
    header = lines[0].strip() if lines else ""
    if not header.startswith("fs="):
        raise ParseError(1, "missing 'fs=<rate>' header")
    try:
        fs = float(header[3:])
    except ValueError:
        raise ParseError(1, f"bad sampling rate {header[3:]!r}") from None
    if not (math.isfinite(fs) and fs > 0):
        raise ParseError(1, "sampling rate must be positive")

    samples = []
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line:
            continue
        try:
            v = float(line)
        except ValueError:
            raise ParseError(lineno, f"bad voltage {line!r}") from None
        if not math.isfinite(v):
            raise ParseError(lineno, "non-finite voltage")
        samples.append(v)
    n = len(samples)

    annotations: list[tuple[int, int]] = []
    prev = -1
    for lineno, line in enumerate(_decode(ann_bytes).split("\n"), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(lineno, "annotation must be '<index>,<code>'")
        try:
            idx, code = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(lineno, "annotation fields must be integers") from None
        if idx < 0 or idx >= n:
            raise ParseError(lineno, f"annotation index {idx} outside signal of length {n}")
        if idx <= prev:
            raise ParseError(lineno, "annotation indices must be strictly increasing")
        if not 0 <= code < N_CLASSES:
            raise ParseError(lineno, f"label {code} outside 0..{N_CLASSES - 1}")
        annotations.append((idx, code))
        prev = idx
    return RawRecord(Signal(np.array(samples), fs), annotations)


def write_raw_record(rec: RawRecord) -> tuple[bytes, bytes]:
    head = "fs=%r\n" % float(rec.signal.fs)
    body = "".join("%.9g\n" % v for v in rec.signal.samples)
    ann = "".join(f"{i},{c}\n" for i, c in rec.annotations)
    return (head + body).encode("utf-8"), ann.encode("utf-8")


def read_raw_record(samples_path, ann_path) -> RawRecord:
    with open(samples_path, "rb") as fs_, open(ann_path, "rb") as fa:
        return parse_raw_record(fs_.read(), fa.read())


def stratified_split(
    ds: BeatDataset, train_fraction: float, seed: int
) -> tuple[BeatDataset, BeatDataset]:
    """Per-class shuffled split; each class contributes round(fraction * count) to train.

    Shuffling uses ``numpy.random.default_rng(seed)`` (PCG64). Within a class the
    train count is clamped to ``[1, count - 1]`` so neither side loses the class.
    """
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for cls in np.unique(ds.labels):
        members = np.flatnonzero(ds.labels == cls)
        if members.size < 2:
            raise InsufficientClass(
                f"class {class_name(int(cls))} has {members.size} beat(s); need at least 2"
            )
        members = members[rng.permutation(members.size)]
        n_train = int(math.floor(train_fraction * members.size + 0.5))
        n_train = min(max(n_train, 1), members.size - 1)
        train_idx.append(members[:n_train])
        test_idx.append(members[n_train:])
    if not train_idx:
        return BeatDataset.empty(ds.segment_len), BeatDataset.empty(ds.segment_len)
    tr = np.sort(np.concatenate(train_idx))
    te = np.sort(np.concatenate(test_idx))
    return ds.subset(tr), ds.subset(te)


def split_indices(ds: BeatDataset, train_fraction: float, seed: int):
    """Index-level variant of :func:`stratified_split`, for tests and auditing."""
    marker = BeatDataset(np.arange(len(ds), dtype=np.float64)[:, None], ds.labels, 1)
    tr, te = stratified_split(marker, train_fraction, seed)
    return tr.beats[:, 0].astype(np.int64), te.beats[:, 0].astype(np.int64)
