"""Confusion matrices, one-vs-rest metrics, log loss, correlations and report output."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import EmptyMatrix, IndexOutOfRange, LengthMismatch
from .nn.layers import PROB_CLIP
from .record_io import CLASS_NAMES

METRIC_FIELDS = ("accuracy", "precision", "recall", "specificity", "f1")


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # rows = true class, columns = predicted class

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other) -> bool:
        return isinstance(other, ConfusionMatrix) and np.array_equal(self.counts, other.counts)


def confusion_matrix(preds, labels, k: int) -> ConfusionMatrix:
    preds = np.asarray(preds, dtype=np.int64).ravel()
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if preds.shape != labels.shape:
        raise LengthMismatch(f"{preds.size} predictions vs {labels.size} labels")
    for name, arr in (("prediction", preds), ("label", labels)):
        bad = arr[(arr < 0) | (arr >= k)]
        if bad.size:
            raise IndexOutOfRange(f"{name} {int(bad[0])} outside 0..{k - 1}")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (labels, preds), 1)
    return ConfusionMatrix(counts)


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


@dataclass(frozen=True)
class ClassMetrics:
    tp: int
    fp: int
    fn: int
    tn: int
    accuracy: float
    precision: float
    recall: float
    specificity: float
    f1: float

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int, tn: int) -> "ClassMetrics":
        total = tp + fp + fn + tn
        if total == 0:
            raise EmptyMatrix("metrics need at least one evaluated sample")
        p = _ratio(tp, tp + fp)
        r = _ratio(tp, tp + fn)
        return cls(
            tp, fp, fn, tn,
            accuracy=(tp + tn) / total,
            precision=p,
            recall=r,
            specificity=_ratio(tn, tn + fp),
            f1=_ratio(2 * p * r, p + r),
        )

    def values(self) -> tuple[float, ...]:
        return tuple(getattr(self, f) for f in METRIC_FIELDS)


def metrics_from_confusion(cm: ConfusionMatrix, c: int) -> ClassMetrics:
    """One-vs-rest counts for class ``c``; 0/0 ratios are 0."""
    if cm.total == 0:
        raise EmptyMatrix("confusion matrix is empty")
    m = cm.counts
    tp = int(m[c, c])
    fp = int(m[:, c].sum()) - tp
    fn = int(m[c, :].sum()) - tp
    tn = cm.total - tp - fp - fn
    return ClassMetrics.from_counts(tp, fp, fn, tn)


def macro_average(per_class: list[ClassMetrics]) -> dict[str, float]:
    return {f: float(np.mean([getattr(m, f) for m in per_class])) for f in METRIC_FIELDS}


def log_loss(probs, labels) -> float:
    """Mean categorical cross-entropy with the classifier's clipping."""
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if probs.shape[0] != labels.size:
        raise LengthMismatch(f"{probs.shape[0]} probability rows vs {labels.size} labels")
    if labels.size == 0:
        return 0.0
    picked = np.clip(probs[np.arange(labels.size), labels], PROB_CLIP, 1 - PROB_CLIP)
    return float(-np.log(picked).mean())


def correlation_matrix(x) -> np.ndarray:
    """Pearson correlation between columns; a constant column correlates 0
    with everything else and 1 with itself."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("correlation_matrix expects an n x d matrix")
    d = x.shape[1]
    if x.shape[0] < 2:
        return np.eye(d)
    xc = x - x.mean(axis=0)
    ss = np.sqrt((xc**2).sum(axis=0))
    live = ss > 1e-12 * np.maximum(1.0, np.abs(x).max(axis=0))
    z = np.zeros_like(xc)
    z[:, live] = xc[:, live] / ss[live]
    corr = np.clip(z.T @ z, -1.0, 1.0)
    corr = (corr + corr.T) / 2
    np.fill_diagonal(corr, 1.0)
    return corr


# ----------------------------------------------------------------- reports


@dataclass
class EvalReport:
    class_names: tuple[str, ...]
    per_class: list[ClassMetrics]
    macro: dict[str, float]
    sample_accuracy: float
    log_loss: float
    confusion: ConfusionMatrix
    seconds: float = 0.0

    def __eq__(self, other) -> bool:
        return isinstance(other, EvalReport) and self.to_records() == other.to_records()

    def to_records(self) -> list[dict]:
        rows = []
        for name, m in zip(self.class_names, self.per_class):
            rows.append({"record": "class", "class": name, **asdict(m)})
        rows.append({"record": "macro", "class": "macro", **self.macro})
        rows.append(
            {
                "record": "summary",
                "sample_accuracy": self.sample_accuracy,
                "log_loss": self.log_loss,
                "seconds": self.seconds,
                "confusion": self.confusion.counts.tolist(),
            }
        )
        return rows

    @classmethod
    def from_records(cls, rows: list[dict]) -> "EvalReport":
        per_class, names, macro, summary = [], [], None, None
        for row in rows:
            kind = row["record"]
            if kind == "class":
                names.append(row["class"])
                per_class.append(ClassMetrics(**{k: row[k] for k in ClassMetrics.__dataclass_fields__}))
            elif kind == "macro":
                macro = {f: row[f] for f in METRIC_FIELDS}
            elif kind == "summary":
                summary = row
        if macro is None or summary is None:
            raise ValueError("report records lack the macro or summary entry")
        return cls(
            tuple(names),
            per_class,
            macro,
            summary["sample_accuracy"],
            summary["log_loss"],
            ConfusionMatrix(np.array(summary["confusion"], dtype=np.int64)),
            summary.get("seconds", 0.0),
        )


def evaluate(probs, labels, class_names=CLASS_NAMES, seconds: float = 0.0) -> EvalReport:
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64)
    k = len(class_names)
    cm = confusion_matrix(np.argmax(probs, axis=1), labels, k)
    per_class = [metrics_from_confusion(cm, c) for c in range(k)]
    return EvalReport(
        tuple(class_names),
        per_class,
        macro_average(per_class),
        float(np.trace(cm.counts) / cm.total),
        log_loss(probs, labels),
        cm,
        seconds,
    )


def emit_report(report: EvalReport, fmt: str = "text", timing: bool = True) -> bytes:
    """Serialize a report as ``text``, ``csv`` (per-class table plus macro row)
    or ``json_lines`` (one JSON object per record, lossless).

    ``timing=False`` leaves out the wall-clock seconds, so that reports from
    identical runs are byte-identical.
    """
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("class",) + METRIC_FIELDS)
        for name, m in zip(report.class_names, report.per_class):
            w.writerow([name] + [repr(v) for v in m.values()])
        w.writerow(["macro"] + [repr(report.macro[f]) for f in METRIC_FIELDS])
        return buf.getvalue().encode("utf-8")
    if fmt == "json_lines":
        records = report.to_records()
        if not timing:
            del records[-1]["seconds"]
        lines = [json.dumps(r, sort_keys=False) for r in records]
        return ("\n".join(lines) + "\n").encode("utf-8")
    if fmt == "text":
        out = [f"{'class':<8}" + "".join(f"{f:>13}" for f in METRIC_FIELDS)]
        for name, m in zip(report.class_names, report.per_class):
            out.append(f"{name:<8}" + "".join(f"{v:>13.6f}" for v in m.values()))
        out.append(f"{'macro':<8}" + "".join(f"{report.macro[f]:>13.6f}" for f in METRIC_FIELDS))
        out.append("")
        out.append(f"sample accuracy  {report.sample_accuracy:.6f}")
        out.append(f"log loss         {report.log_loss:.6f}")
        if timing:
            out.append(f"seconds          {report.seconds:.3f}")
        out.append("")
        out.append("confusion (rows true, columns predicted)")
        width = max(5, len(str(report.confusion.counts.max(initial=0))) + 1)
        out.append(" " * 8 + "".join(f"{n:>{width}}" for n in report.class_names))
        for name, row in zip(report.class_names, report.confusion.counts):
            out.append(f"{name:<8}" + "".join(f"{v:>{width}d}" for v in row))
        return ("\n".join(out) + "\n").encode("utf-8")
    raise ValueError(f"unknown report format {fmt!r}")


def parse_report_csv(data: bytes) -> dict[str, tuple[float, ...]]:
    rows = list(csv.reader(io.StringIO(data.decode("utf-8"))))
    if not rows or tuple(rows[0]) != ("class",) + METRIC_FIELDS:
        raise ValueError("not a report CSV")
    return {r[0]: tuple(float(v) for v in r[1:]) for r in rows[1:]}


def parse_report_json_lines(data: bytes) -> EvalReport:
    return EvalReport.from_records([json.loads(line) for line in data.decode("utf-8").splitlines() if line])


def confusion_csv(cm: ConfusionMatrix) -> bytes:
    return "".join(",".join(str(v) for v in row) + "\n" for row in cm.counts).encode("utf-8")
