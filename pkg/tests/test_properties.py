import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hardc.cgan import balance_plan
from hardc.dsp.wavelet import wavedec, waverec
from hardc.metrics import ClassMetrics, confusion_matrix, metrics_from_confusion
from hardc.model import RoutingTrace, attention_aggregate, attention_weights, routing
from hardc.nn.layers import softmax, squash
from hardc.nn.optim import to_f32
from hardc.nn.serialize import read_blob, write_blob
from hardc.nn.tensor import Tensor
from hardc.record_io import BeatDataset, parse_beat_csv, split_indices, write_beat_csv

finite = st.floats(-50, 50, allow_nan=False)
PROPS = settings(max_examples=60, deadline=None)


@PROPS
@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 9)), elements=finite))
def test_softmax_rows_are_distributions(z):
    p = softmax(Tensor(z), axis=-1).data
    np.testing.assert_allclose(p.sum(axis=-1), 1.0, atol=1e-12)
    assert (p >= 0).all()
    np.testing.assert_allclose(softmax(Tensor(z - 7.5), axis=-1).data, p, atol=1e-12)


@PROPS
@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 6)), elements=st.floats(-1e3, 1e3)))
def test_squash_keeps_direction_and_bounds_norm(s):
    v = squash(Tensor(s), axis=-1).data
    ns, nv = np.linalg.norm(s, axis=1), np.linalg.norm(v, axis=1)
    assert (nv < 1).all()
    live = ns > 1e-6
    np.testing.assert_allclose(v[live] * ns[live, None], s[live] * nv[live, None], atol=1e-9 * (1 + ns.max()))


@PROPS
@given(
    st.integers(1, 6), st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), st.integers(1, 4),
    st.integers(0, 2**32 - 1),
)
def test_routing_couplings_and_norms(n, d, M, e, iters, seed):
    rng = np.random.default_rng(seed)
    tr = RoutingTrace()
    cv = routing(Tensor(rng.standard_normal((n, d)) * 2), Tensor(rng.standard_normal((M, d, e))), iters, tr).data
    for c in tr.couplings:
        np.testing.assert_allclose(c.sum(axis=1), 1.0, atol=1e-9)
    assert (np.linalg.norm(cv, axis=1) < 1).all()


@PROPS
@given(st.integers(1, 8), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_attention_output_is_convex_combination(M, e, seed):
    rng = np.random.default_rng(seed)
    cv, q = rng.standard_normal((M, e)), rng.standard_normal(e) * 3
    a = attention_weights(Tensor(cv), Tensor(q)).data
    assert abs(a.sum() - 1) <= 1e-12 and (a >= 0).all()
    o = attention_aggregate(Tensor(cv), Tensor(q)).data
    assert (o <= cv.max(axis=0) + 1e-12).all() and (o >= cv.min(axis=0) - 1e-12).all()


@PROPS
@given(st.integers(6, 11), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_wavelet_perfect_reconstruction(log_n, moments, seed):
    x = np.random.default_rng(seed).standard_normal(2**log_n)
    levels = min(4, log_n - 2)
    y = waverec(wavedec(x, moments, levels), moments)
    assert np.linalg.norm(y - x) / np.linalg.norm(x) < 1e-8


@PROPS
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=60))
def test_confusion_marginals(pairs):
    preds, labels = zip(*pairs)
    cm = confusion_matrix(preds, labels, 5)
    assert cm.counts.sum(axis=1).tolist() == np.bincount(labels, minlength=5).tolist()
    assert cm.counts.sum(axis=0).tolist() == np.bincount(preds, minlength=5).tolist()
    for c in range(5):
        m = metrics_from_confusion(cm, c)
        assert all(0 <= v <= 1 for v in m.values())


@PROPS
@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_f1_is_harmonic_mean(tp, fp, fn, tn):
    if tp + fp + fn + tn == 0:
        return
    m = ClassMetrics.from_counts(tp, fp, fn, tn)
    if m.precision and m.recall:
        assert abs(1 / m.f1 - (1 / m.precision + 1 / m.recall) / 2) < 1e-9


@PROPS
@given(st.lists(st.integers(1, 500), min_size=1, max_size=6))
def test_balance_plan_reaches_majority(counts):
    plan = balance_plan(counts)
    assert ((np.array(counts) + plan) == max(counts)).all()
    assert (plan >= 0).all()


@PROPS
@given(st.dictionaries(
    st.text("abcdefgh.", min_size=1, max_size=8),
    arrays(np.float64, st.lists(st.integers(0, 3), max_size=3).map(tuple), elements=st.floats(-1e6, 1e6, width=32)),
    max_size=4,
))
def test_blob_round_trip(tensors):
    back = read_blob(write_blob(tensors))
    assert list(back) == list(tensors)
    for k, v in tensors.items():
        np.testing.assert_array_equal(back[k], to_f32(v))


@PROPS
@given(st.integers(2, 30), st.integers(0, 2**32 - 1))
def test_beat_csv_round_trip(n, seed):
    rng = np.random.default_rng(seed)
    ds = BeatDataset(rng.uniform(-1, 1, (n, 8)), rng.integers(0, 5, n), 8)
    back = parse_beat_csv(write_beat_csv(ds), 8)
    np.testing.assert_allclose(back.beats, ds.beats, atol=1e-9, rtol=0)
    assert back.labels.tolist() == ds.labels.tolist()


@PROPS
@given(st.lists(st.integers(2, 20), min_size=1, max_size=5), st.floats(0.1, 0.9), st.integers(0, 1000))
def test_split_is_partition_keeping_every_class(sizes, frac, seed):
    labels = np.repeat(np.arange(len(sizes)), sizes)
    ds = BeatDataset(np.zeros((len(labels), 1)), labels, 1)
    tr, te = split_indices(ds, frac, seed)
    assert sorted(np.concatenate([tr, te]).tolist()) == list(range(len(labels)))
    assert set(labels[tr]) == set(labels[te]) == set(labels)
