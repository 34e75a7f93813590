"""Class-conditioned GAN for synthesizing minority-class beats."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import DataError, EmptyDataset, MissingClass
from .nn import layers as L
from .nn.optim import AdamState, adam_step, to_f32
from .nn.serialize import read_checkpoint, write_checkpoint
from .nn.tensor import Tensor, as_tensor, backward, clip, concat, log, mean, relu, reshape, sigmoid
from .record_io import N_CLASSES, BeatDataset

log_ = logging.getLogger(__name__)

D_CLIP = 1e-7


@dataclass(frozen=True)
class GanSpec:
    segment_len: int = 360
    latent_dim: int = 32
    classes: int = N_CLASSES
    gen_steps: int = 8  # length of the generator's internal sequence
    gen_channels: int = 8
    gen_units: int = 8
    gen_kernel: int = 3
    disc_filters: int = 8
    disc_kernel: int = 5
    disc_pool: int = 4

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 1:
                raise ValueError(f"GanSpec.{f.name} must be >= 1")

    @classmethod
    def from_dict(cls, values: dict) -> "GanSpec":
        return cls(**{k: int(v) for k, v in values.items()})


def _init(rng, shape, fan_in):
    lim = 1.0 / np.sqrt(fan_in)
    return Tensor(to_f32(rng.uniform(-lim, lim, size=shape)), requires_grad=True)


def _zeros(shape):
    return Tensor(np.zeros(shape), requires_grad=True)


class Generator:
    """[z ‖ one-hot] -> dense -> [steps, channels] -> conv -> relu -> BiLSTM -> dense(segment_len)."""

    def __init__(self, spec: GanSpec, seed: int = 0):
        self.spec = spec
        rng = np.random.default_rng([seed, 10])
        s = spec
        din = s.latent_dim + s.classes
        u = s.gen_units
        self.params = {
            "gen.in.w": _init(rng, (din, s.gen_steps * s.gen_channels), din),
            "gen.in.b": _zeros((s.gen_steps * s.gen_channels,)),
            "gen.conv.w": _init(rng, (s.gen_channels, s.gen_channels, s.gen_kernel), s.gen_channels * s.gen_kernel),
        }
        for d in ("fwd", "bwd"):
            self.params[f"gen.lstm.{d}.wx"] = _init(rng, (s.gen_channels, 4 * u), s.gen_channels)
            self.params[f"gen.lstm.{d}.wh"] = _init(rng, (u, 4 * u), u)
            self.params[f"gen.lstm.{d}.b"] = _zeros((4 * u,))
        flat = s.gen_steps * 2 * u
        self.params["gen.out.w"] = _init(rng, (flat, s.segment_len), flat)
        self.params["gen.out.b"] = _zeros((s.segment_len,))

    def forward(self, z, labels) -> Tensor:
        s = self.spec
        z = as_tensor(z)
        onehot = np.eye(s.classes)[np.asarray(labels, dtype=np.int64)]
        p = self.params
        h = L.dense(concat([z, Tensor(onehot)], axis=-1), p["gen.in.w"], p["gen.in.b"])
        h = reshape(h, (z.shape[0], s.gen_steps, s.gen_channels))
        h = relu(L.conv1d_dilated(h, p["gen.conv.w"], 1, padding="same"))
        h = L.bilstm_forward(h, p, prefix="gen.lstm.")
        h = reshape(h, (z.shape[0], s.gen_steps * 2 * s.gen_units))
        return L.dense(h, p["gen.out.w"], p["gen.out.b"])

    def sample(self, labels, rng: np.random.Generator) -> np.ndarray:
        labels = np.asarray(labels, dtype=np.int64)
        z = rng.standard_normal((labels.size, self.spec.latent_dim))
        if labels.size == 0:
            return np.zeros((0, self.spec.segment_len))
        return self.forward(z, labels).data


class Discriminator:
    """conv (+ class embedding) -> relu -> dilated conv -> relu -> max pool -> dense -> sigmoid."""

    def __init__(self, spec: GanSpec, seed: int = 0):
        self.spec = spec
        rng = np.random.default_rng([seed, 11])
        s = spec
        f, k = s.disc_filters, s.disc_kernel
        pooled = -(-s.segment_len // s.disc_pool)
        self.params = {
            "disc.conv1.w": _init(rng, (f, 1, k), k),
            "disc.embed": _init(rng, (s.classes, f), 1),
            "disc.conv2.w": _init(rng, (f, f, k), f * k),
            "disc.out.w": _init(rng, (pooled * f, 1), pooled * f),
            "disc.out.b": _zeros((1,)),
        }

    def forward(self, x, labels) -> Tensor:
        """Probability that each beat is real, clipped into [1e-7, 1 - 1e-7]."""
        s = self.spec
        p = self.params
        x = as_tensor(x)
        n = x.shape[0]
        h = L.conv1d_dilated(reshape(x, (n, s.segment_len, 1)), p["disc.conv1.w"], 1, padding="same")
        emb = L.dense(Tensor(np.eye(s.classes)[np.asarray(labels, dtype=np.int64)]), p["disc.embed"])
        h = relu(h + reshape(emb, (n, 1, s.disc_filters)))
        h = relu(L.conv1d_dilated(h, p["disc.conv2.w"], 2, padding="same"))
        h = L.max_pool(h, s.disc_pool, axis=1)
        h = reshape(h, (n, h.shape[1] * h.shape[2]))
        logit = L.dense(h, p["disc.out.w"], p["disc.out.b"])
        return clip(reshape(sigmoid(logit), (n,)), D_CLIP, 1 - D_CLIP)


def gan_losses(d_real, d_fake, generator_loss: str = "non_saturating") -> tuple[Tensor, Tensor]:
    """(loss_d, loss_g) from discriminator probabilities.

    loss_d = -mean(log d_real) - mean(log(1 - d_fake)). The generator loss is
    -mean(log d_fake) ("non_saturating") or mean(log(1 - d_fake)) ("minimax").
    Probabilities are clipped to [1e-7, 1 - 1e-7] first.
    """
    d_real = clip(as_tensor(d_real), D_CLIP, 1 - D_CLIP)
    d_fake = clip(as_tensor(d_fake), D_CLIP, 1 - D_CLIP)
    loss_d = -mean(log(d_real)) - mean(log(1.0 - d_fake))
    if generator_loss == "non_saturating":
        loss_g = -mean(log(d_fake))
    elif generator_loss == "minimax":
        loss_g = mean(log(1.0 - d_fake))
    else:
        raise ValueError(f"unknown generator loss {generator_loss!r}")
    return loss_d, loss_g


@dataclass(frozen=True)
class GanHyper:
    epochs: int = 20
    batch: int = 32
    lr: float = 1e-3
    beta1: float = 0.5
    d_steps: int = 1
    g_steps: int = 1
    seed: int = 0
    generator_loss: str = "non_saturating"


@dataclass
class GanResult:
    generator: Generator
    discriminator: Discriminator
    history: list[tuple[float, float]] = field(default_factory=list)  # per-epoch mean (loss_d, loss_g)


def _zero_grads(params):
    for p in params.values():
        p.grad = None


def discriminator_step(g: Generator, d: Discriminator, opt: AdamState, x, y, rng, mode="non_saturating") -> float:
    """One update of the discriminator on a real batch plus as many fakes."""
    fake = g.sample(y, rng)
    _zero_grads(d.params)
    loss_d, _ = gan_losses(d.forward(x, y), d.forward(fake, y), mode)
    backward(loss_d)
    adam_step(opt, d.params)
    return float(loss_d.data)


def generator_step(g: Generator, d: Discriminator, opt: AdamState, y, rng, mode="non_saturating") -> float:
    z = rng.standard_normal((len(y), g.spec.latent_dim))
    _zero_grads(g.params)
    _zero_grads(d.params)
    fake = g.forward(z, y)
    _, loss_g = gan_losses(Tensor(np.full(len(y), 0.5)), d.forward(fake, y), mode)
    backward(loss_g)
    adam_step(opt, g.params)
    return float(loss_g.data)


def train_cgan(real: BeatDataset, spec: GanSpec | None = None, hyper: GanHyper = GanHyper(), progress=None) -> GanResult:
    """Alternating discriminator/generator Adam updates (d_steps : g_steps per batch)."""
    if len(real) == 0:
        raise EmptyDataset("cannot train a GAN on an empty dataset")
    spec = spec or GanSpec(segment_len=real.segment_len)
    if spec.segment_len != real.segment_len:
        raise DataError(f"GAN segment_len {spec.segment_len} != data {real.segment_len}")
    g = Generator(spec, hyper.seed)
    d = Discriminator(spec, hyper.seed)
    opt_g = AdamState(lr=hyper.lr, beta1=hyper.beta1, l2=0.0)
    opt_d = AdamState(lr=hyper.lr, beta1=hyper.beta1, l2=0.0)
    rng = np.random.default_rng([hyper.seed, 12])
    history = []
    n = len(real)
    for epoch in range(1, hyper.epochs + 1):
        perm = rng.permutation(n)
        ld, lg = [], []
        for start in range(0, n, hyper.batch):
            idx = perm[start : start + hyper.batch]
            x, y = real.beats[idx], real.labels[idx]
            for _ in range(hyper.d_steps):
                ld.append(discriminator_step(g, d, opt_d, x, y, rng, hyper.generator_loss))
            for _ in range(hyper.g_steps):
                lg.append(generator_step(g, d, opt_g, y, rng, hyper.generator_loss))
        history.append((float(np.mean(ld)), float(np.mean(lg))))
        log_.info("gan epoch %d loss_d %.6f loss_g %.6f", epoch, *history[-1])
        if progress is not None:
            progress(epoch, *history[-1])
    return GanResult(g, d, history)


def synthesize(g: Generator, cls: int, n: int, seed: int = 0) -> BeatDataset:
    """n generated beats labeled ``cls``; the same seed gives the same beats."""
    if n == 0:
        return BeatDataset.empty(g.spec.segment_len)
    rng = np.random.default_rng([seed, 13, int(cls)])
    labels = np.full(n, int(cls), dtype=np.int64)
    return BeatDataset(g.sample(labels, rng), labels, g.spec.segment_len)


def balance_plan(counts, target="match_majority") -> np.ndarray:
    """How many synthetic beats each class needs to reach ``target``.

    ``target`` is "match_majority" or a per-class sequence of counts; a class
    already at or above its target gets nothing (originals are never dropped).
    """
    counts = np.asarray(counts, dtype=np.int64)
    if isinstance(target, str):
        if target != "match_majority":
            raise ValueError(f"unknown balance target {target!r}")
        goal = np.full_like(counts, counts.max())
    else:
        goal = np.asarray(target, dtype=np.int64)
        if goal.shape != counts.shape:
            raise ValueError("per-class target must list one count per class")
    return np.maximum(goal - counts, 0)


def augment_to_balance(ds: BeatDataset, g: Generator, target="match_majority", seed: int = 0) -> BeatDataset:
    """Original beats (unchanged, in order) followed by synthetic top-ups per class."""
    classes = g.spec.classes
    counts = ds.class_counts(classes)
    absent = [c for c in range(classes) if counts[c] == 0]
    if absent:
        raise MissingClass(f"classes {absent} have no beats to balance against")
    plan = balance_plan(counts, target)
    parts = [ds] + [synthesize(g, c, int(k), seed) for c, k in enumerate(plan) if k]
    return BeatDataset.concat(parts) if len(parts) > 1 else ds


# ----------------------------------------------------------------- persistence


def gan_bytes(model: Generator | Discriminator, seed: int = 0) -> bytes:
    component = "generator" if isinstance(model, Generator) else "discriminator"
    header = {"component": component, "seed": str(seed)}
    header.update({f"spec.{k}": str(v) for k, v in asdict(model.spec).items()})
    return write_checkpoint(header, {k: p.data for k, p in model.params.items()})


def gan_from_bytes(data: bytes):
    header, tensors = read_checkpoint(data)
    cls = {"generator": Generator, "discriminator": Discriminator}.get(header.get("component", ""))
    if cls is None:
        raise DataError(f"not a GAN checkpoint (component={header.get('component')!r})")
    spec = GanSpec.from_dict({k[5:]: v for k, v in header.items() if k.startswith("spec.")})
    model = cls(spec, int(header.get("seed", 0)))
    if set(tensors) != set(model.params):
        raise DataError("GAN checkpoint tensors do not match the architecture")
    for k, arr in tensors.items():
        if arr.shape != model.params[k].shape:
            raise DataError(f"{k}: stored shape {arr.shape}, expected {model.params[k].shape}")
        model.params[k] = Tensor(arr, requires_grad=True)
    return model


def save_generator(path, g: Generator, seed: int = 0) -> None:
    Path(path).write_bytes(gan_bytes(g, seed))


def load_generator(path) -> Generator:
    model = gan_from_bytes(Path(path).read_bytes())
    if not isinstance(model, Generator):
        raise DataError(f"{path} holds a discriminator, not a generator")
    return model
