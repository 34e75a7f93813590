"""Mini-batch training of the classifier and checkpoint persistence."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DataError, EmptyDataset, ShapeMismatch
from ..nn.layers import cross_entropy
from ..nn.optim import AdamState, adam_step, to_f32
from ..nn.serialize import read_checkpoint, write_checkpoint
from ..nn.tensor import backward
from ..record_io import BeatDataset
from .network import Model, build_model
from .spec import ModelSpec, layer_plan

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainHyper:
    epochs: int = 100
    batch: int = 32
    lr: float = 1e-3
    l2: float = 1e-3
    seed: int = 0
    target_accuracy: float | None = None  # stop early once train accuracy reaches this


@dataclass
class Checkpoint:
    spec: ModelSpec
    tensors: dict[str, np.ndarray]
    seed: int = 0
    history: list[tuple[float, float]] = field(default_factory=list)

    def model(self) -> Model:
        m = build_model(self.spec, self.seed)
        m.load_state(self.tensors)
        return m


def canonical_order(ds: BeatDataset) -> np.ndarray:
    """Sort by label, then by sample values, so training ignores input order."""
    keys = tuple(ds.beats[:, j] for j in range(ds.beats.shape[1] - 1, -1, -1)) + (ds.labels,)
    return np.lexsort(keys)


def accuracy(model: Model, ds: BeatDataset) -> float:
    probs = model.predict_proba(ds.beats)
    return float(np.mean(np.argmax(probs, axis=1) == ds.labels))


def train(model: Model, ds: BeatDataset, hyper: TrainHyper = TrainHyper(), progress=None) -> Checkpoint:
    """Adam on batch-mean cross-entropy plus the L2 penalty.

    Batches come from a seeded permutation of the canonically ordered set, so
    the result depends only on the multiset of beats and the seed. History
    holds (mean batch loss, eval-mode train accuracy) per epoch.
    """
    if len(ds) == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    if ds.segment_len != model.spec.segment_len:
        raise ShapeMismatch(f"dataset segment_len {ds.segment_len} != model {model.spec.segment_len}")
    if ds.labels.max() >= model.spec.classes:
        raise DataError(f"label {int(ds.labels.max())} outside the model's {model.spec.classes} classes")
    order = canonical_order(ds)
    beats, labels = ds.beats[order], ds.labels[order]
    shuffle_rng = np.random.default_rng([hyper.seed, 1])
    drop_rng = np.random.default_rng([hyper.seed, 2])
    opt = AdamState(lr=hyper.lr, l2=hyper.l2)
    history: list[tuple[float, float]] = []
    n = len(labels)
    for epoch in range(1, hyper.epochs + 1):
        perm = shuffle_rng.permutation(n)
        losses = []
        for start in range(0, n, hyper.batch):
            idx = perm[start : start + hyper.batch]
            for p in model.params.values():
                p.grad = None
            probs = model.forward(beats[idx], training=True, rng=drop_rng)
            loss = cross_entropy(probs, labels[idx])
            backward(loss)
            if hyper.lr:
                adam_step(opt, model.params)
            # running statistics are stored as float32 too, so keep them on that grid
            for run in model._running.values():
                run["mean"] = to_f32(run["mean"])
                run["var"] = to_f32(run["var"])
            losses.append(float(loss.data) * len(idx))
        mean_loss = sum(losses) / n
        acc = accuracy(model, ds)
        history.append((mean_loss, acc))
        log.info("epoch %d loss %.6f accuracy %.4f", epoch, mean_loss, acc)
        if progress is not None:
            progress(epoch, mean_loss, acc)
        if hyper.target_accuracy is not None and acc >= hyper.target_accuracy:
            break
    return Checkpoint(model.spec, model.state(), hyper.seed, history)


# ----------------------------------------------------------------- persistence


def checkpoint_bytes(ck: Checkpoint) -> bytes:
    header = {"component": "classifier", "seed": str(ck.seed)}
    for k, v in ck.spec.to_dict().items():
        header[f"spec.{k}"] = repr(v)
    header["history"] = ";".join(f"{loss!r}:{acc!r}" for loss, acc in ck.history)
    return write_checkpoint(header, ck.tensors)


def checkpoint_from_bytes(data: bytes) -> Checkpoint:
    header, tensors = read_checkpoint(data)
    if header.get("component") != "classifier":
        raise DataError(f"not a classifier checkpoint (component={header.get('component')!r})")
    spec = ModelSpec.from_dict({k[5:]: v for k, v in header.items() if k.startswith("spec.")})
    names = [name for name, _, _ in layer_plan(spec)]
    missing = [n for n in names if n not in tensors]
    extra = [n for n in tensors if n not in names]
    if missing or extra:
        raise DataError(f"checkpoint tensors do not match the layer plan (missing {missing}, extra {extra})")
    for name, shape, _ in layer_plan(spec):
        if tensors[name].shape != shape:
            raise DataError(f"{name}: stored shape {tensors[name].shape}, expected {shape}")
    history = []
    if header.get("history"):
        for item in header["history"].split(";"):
            loss, acc = item.split(":")
            history.append((float(loss), float(acc)))
    return Checkpoint(spec, tensors, int(header.get("seed", 0)), history)


def save_checkpoint(path, ck: Checkpoint) -> None:
    Path(path).write_bytes(checkpoint_bytes(ck))


def load_checkpoint(path) -> Checkpoint:
    return checkpoint_from_bytes(Path(path).read_bytes())


def history_csv(history: list[tuple[float, float]]) -> str:
    lines = ["epoch,loss,accuracy"]
    lines += [f"{i},{loss:.9g},{acc:.9g}" for i, (loss, acc) in enumerate(history, start=1)]
    return "\n".join(lines) + "\n"
