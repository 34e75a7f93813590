import math

import numpy as np
import pytest

from hardc.cgan import (
    Discriminator,
    GanHyper,
    GanSpec,
    Generator,
    augment_to_balance,
    balance_plan,
    discriminator_step,
    gan_bytes,
    gan_from_bytes,
    gan_losses,
    generator_step,
    load_generator,
    save_generator,
    synthesize,
    train_cgan,
)
from hardc.errors import DataError, EmptyDataset, MissingClass
from hardc.nn.gradcheck import check_gradients
from hardc.nn.optim import AdamState
from hardc.record_io import CORPUS_CLASS_COUNTS, BeatDataset
from hardc.synthetic import toy_beats

SPEC = GanSpec(segment_len=32, latent_dim=4, gen_steps=4, gen_channels=3, gen_units=3, disc_filters=3)


def test_losses_at_half():
    d = np.full(6, 0.5)
    for mode in ("non_saturating", "minimax"):
        loss_d, _ = gan_losses(d, d, mode)
        assert abs(loss_d.item() - 2 * math.log(2)) <= 1e-12
    _, g_ns = gan_losses(d, d, "non_saturating")
    _, g_mm = gan_losses(d, d, "minimax")
    assert g_ns.item() == pytest.approx(math.log(2), abs=1e-12)
    assert g_mm.item() == pytest.approx(-math.log(2), abs=1e-12)


def test_losses_oracle():
    real, fake = [0.9, 0.6], [0.2, 0.3]
    loss_d, loss_g = gan_losses(real, fake)
    want_d = -(math.log(0.9) + math.log(0.6)) / 2 - (math.log(0.8) + math.log(0.7)) / 2
    assert loss_d.item() == pytest.approx(want_d, abs=1e-14)
    assert loss_g.item() == pytest.approx(-(math.log(0.2) + math.log(0.3)) / 2, abs=1e-14)


def test_losses_clip_saturated_outputs():
    loss_d, loss_g = gan_losses([1.0], [0.0])
    assert math.isfinite(loss_d.item()) and math.isfinite(loss_g.item())
    with pytest.raises(ValueError):
        gan_losses([0.5], [0.5], "wasserstein")


def test_shapes_and_range(rng):
    g, d = Generator(SPEC, 0), Discriminator(SPEC, 0)
    labels = np.array([0, 1, 4])
    x = g.sample(labels, rng)
    assert x.shape == (3, 32) and np.isfinite(x).all()
    p = d.forward(x, labels).data
    assert p.shape == (3,) and ((p > 0) & (p < 1)).all()


def test_gradients(rng):
    g, d = Generator(SPEC, 1), Discriminator(SPEC, 1)
    z = rng.standard_normal((2, SPEC.latent_dim))
    x = rng.standard_normal((2, 32))
    y = np.array([1, 3])
    errs = check_gradients(lambda: gan_losses(d.forward(x, y), d.forward(g.forward(z, y), y))[0], {**d.params})
    assert max(errs.values()) < 1e-4
    errs = check_gradients(lambda: gan_losses([0.5], d.forward(g.forward(z, y), y))[1], {**g.params})
    assert max(errs.values()) < 1e-4


def test_discriminator_step_reduces_its_loss(rng):
    g, d = Generator(SPEC, 2), Discriminator(SPEC, 2)
    x = toy_beats(16, 32, seed=1)
    fake = g.sample(x.labels, np.random.default_rng(77))
    before = gan_losses(d.forward(x.beats, x.labels), d.forward(fake, x.labels))[0].item()
    stepped = discriminator_step(g, d, AdamState(lr=1e-3, beta1=0.5, l2=0.0), x.beats, x.labels, np.random.default_rng(77))
    after = gan_losses(d.forward(x.beats, x.labels), d.forward(fake, x.labels))[0].item()
    assert stepped == pytest.approx(before, abs=1e-12)
    assert after < before


def test_generator_step_reduces_its_loss():
    g, d = Generator(SPEC, 3), Discriminator(SPEC, 3)
    y = np.arange(10) % 5
    z = np.random.default_rng(5).standard_normal((10, SPEC.latent_dim))
    before = gan_losses([0.5], d.forward(g.forward(z, y), y))[1].item()
    generator_step(g, d, AdamState(lr=1e-3, beta1=0.5, l2=0.0), y, np.random.default_rng(5))
    after = gan_losses([0.5], d.forward(g.forward(z, y), y))[1].item()
    assert after < before


def test_train_cgan_deterministic():
    ds = toy_beats(30, 32, seed=4)
    h = GanHyper(epochs=2, batch=16, seed=5)
    a, b = train_cgan(ds, SPEC, h), train_cgan(ds, SPEC, h)
    assert a.history == b.history
    assert gan_bytes(a.generator) == gan_bytes(b.generator)
    assert len(a.history) == 2 and all(np.isfinite(a.history).ravel())


def test_train_cgan_errors():
    with pytest.raises(EmptyDataset):
        train_cgan(BeatDataset.empty(32), SPEC)
    with pytest.raises(DataError):
        train_cgan(toy_beats(10, 16), SPEC)


def test_synthesize():
    g = Generator(SPEC, 0)
    assert len(synthesize(g, 2, 0)) == 0
    s = synthesize(g, 3, 6, seed=1)
    assert (s.labels == 3).all() and s.beats.shape == (6, 32)
    assert s.beats.var(axis=0).max() > 0
    np.testing.assert_array_equal(synthesize(g, 3, 6, seed=1).beats, s.beats)
    assert not np.array_equal(synthesize(g, 3, 6, seed=2).beats, s.beats)


def _unbalanced(counts):
    rng = np.random.default_rng(0)
    labels = np.repeat(np.arange(len(counts)), counts)
    return BeatDataset(rng.standard_normal((len(labels), 32)), labels, 32)


def test_augment_to_balance():
    ds = _unbalanced((100, 20, 20, 20, 20))
    out = augment_to_balance(ds, Generator(SPEC, 0), seed=3)
    assert out.class_counts(5).tolist() == [100] * 5
    np.testing.assert_array_equal(out.beats[: len(ds)], ds.beats)
    np.testing.assert_array_equal(out.labels[: len(ds)], ds.labels)


def test_augment_balanced_input_unchanged():
    ds = _unbalanced((7, 7, 7, 7, 7))
    out = augment_to_balance(ds, Generator(SPEC, 0))
    np.testing.assert_array_equal(out.beats, ds.beats)


def test_augment_missing_class():
    with pytest.raises(MissingClass):
        augment_to_balance(_unbalanced((5, 5, 0, 5, 5)), Generator(SPEC, 0))


def test_balance_plan_corpus_counts():
    plan = balance_plan(CORPUS_CLASS_COUNTS)
    assert (np.array(CORPUS_CLASS_COUNTS) + plan).tolist() == [90589] * 5
    assert balance_plan((5, 9), (8, 8)).tolist() == [3, 0]


def test_checkpoint_round_trip(tmp_path):
    g = Generator(SPEC, 4)
    path = tmp_path / "g.ckpt"
    save_generator(path, g, seed=4)
    back = load_generator(path)
    assert back.spec == SPEC
    assert gan_bytes(back, 4) == gan_bytes(g, 4)
    d = gan_from_bytes(gan_bytes(Discriminator(SPEC, 0)))
    assert isinstance(d, Discriminator)
    path.write_bytes(gan_bytes(Discriminator(SPEC, 0)))
    with pytest.raises(DataError):
        load_generator(path)
