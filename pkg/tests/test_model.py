import math

import numpy as np
import pytest

from hardc.errors import DataError, EmptyDataset, ShapeMismatch, SpecError
from hardc.model import (
    Checkpoint,
    ModelSpec,
    RoutingTrace,
    TrainHyper,
    attention_aggregate,
    attention_weights,
    build_model,
    checkpoint_bytes,
    checkpoint_from_bytes,
    dilations,
    history_csv,
    layer_plan,
    measure_receptive_field,
    predict,
    receptive_field,
    routing,
    train,
)
from hardc.nn.tensor import Tensor
from hardc.record_io import BeatDataset
from hardc.synthetic import toy_beats

MICRO = ModelSpec(
    segment_len=16, rnn_units_block1=2, rnn_units_block2=2, conv_blocks=2,
    kernel_width=2, filters=3, target_convs=5, attention_dim=4, classes=5,
)
GOLDEN_BEAT = np.sin(np.arange(16) / 2.0)
GOLDEN_PROBS = [0.19998136802682395, 0.200079774822425, 0.2000362887256921, 0.19998018315173843, 0.19992238527332049]


# ----------------------------------------------------------------- routing


def routing_oracle(rv, w, iters):
    """Plain scalar loops over the routing-by-agreement recursion."""
    n, d = len(rv), len(rv[0])
    M, _, e = len(w), len(w[0]), len(w[0][0])
    pred = [[[sum(rv[i][a] * w[j][a][k] for a in range(d)) for k in range(e)] for j in range(M)] for i in range(n)]
    b = [[0.0] * M for _ in range(n)]
    couplings = []
    for _ in range(iters):
        c = []
        for i in range(n):
            ex = [math.exp(v) for v in b[i]]
            c.append([v / sum(ex) for v in ex])
        couplings.append(c)
        cv = []
        for j in range(M):
            s = [sum(c[i][j] * pred[i][j][k] for i in range(n)) for k in range(e)]
            nrm2 = sum(v * v for v in s)
            scale = nrm2 / (1 + nrm2) / math.sqrt(nrm2) if nrm2 > 0 else 0.0
            cv.append([scale * v for v in s])
        for i in range(n):
            for j in range(M):
                b[i][j] += sum(cv[j][k] * pred[i][j][k] for k in range(e))
    return cv, couplings


def test_routing_two_by_two_oracle():
    rv = [[0.5, -1.0], [2.0, 0.25]]
    w = [[[1.0, 0.5], [-0.5, 0.3]], [[0.2, -1.0], [0.7, 0.1]]]
    tr = RoutingTrace()
    cv = routing(Tensor(rv), Tensor(w), 3, tr).data
    want, couplings = routing_oracle(rv, w, 3)
    np.testing.assert_allclose(cv, want, atol=1e-9)
    for got, ref in zip(tr.couplings, couplings):
        np.testing.assert_allclose(got, ref, atol=1e-9)


def test_routing_invariants(rng):
    for iters in (1, 2, 3, 5):
        tr = RoutingTrace()
        cv = routing(Tensor(rng.standard_normal((9, 4)) * 3), Tensor(rng.standard_normal((4, 4, 6))), iters, tr).data
        assert len(tr.couplings) == iters
        for c in tr.couplings:
            np.testing.assert_allclose(c.sum(axis=1), 1.0, atol=1e-9)
        norms = np.linalg.norm(cv, axis=1)
        assert ((norms > 0) & (norms < 1)).all()


def test_single_iteration_couples_uniformly(rng):
    tr = RoutingTrace()
    routing(Tensor(rng.standard_normal((5, 3))), Tensor(rng.standard_normal((4, 3, 2))), 1, tr)
    np.testing.assert_array_equal(tr.couplings[0], 0.25)


def test_routing_batched_matches_single(rng):
    rv = rng.standard_normal((3, 6, 4))
    w = Tensor(rng.standard_normal((3, 4, 5)))
    batched = routing(Tensor(rv), w, 3).data
    for i in range(3):
        np.testing.assert_allclose(batched[i], routing(Tensor(rv[i]), w, 3).data, atol=1e-13)


def test_routing_shape_errors(rng):
    with pytest.raises(ShapeMismatch):
        routing(Tensor(rng.standard_normal((5, 3))), Tensor(rng.standard_normal((4, 2, 2))), 3)
    with pytest.raises(ShapeMismatch):
        routing(Tensor(rng.standard_normal((5, 3))), Tensor(rng.standard_normal((4, 3, 2))), 0)


# ----------------------------------------------------------------- attention


def test_attention_equal_targets_returns_common_vector(rng):
    v = rng.standard_normal(4)
    o = attention_aggregate(Tensor(np.tile(v, (6, 1))), Tensor(rng.standard_normal(4))).data
    np.testing.assert_allclose(o, v, atol=1e-14)


def test_attention_weights_sum_to_one(rng):
    for _ in range(20):
        a = attention_weights(Tensor(rng.standard_normal((7, 3)) * 10), Tensor(rng.standard_normal(3))).data
        assert abs(a.sum() - 1) <= 1e-12


def test_attention_scalar_oracle():
    cv = [[0.1, 0.2], [-0.3, 0.4], [0.5, -0.6]]
    q = [1.5, -0.5]
    e = [q[0] * r[0] + q[1] * r[1] for r in cv]
    z = sum(math.exp(v) for v in e)
    o = [sum(math.exp(e[j]) / z * cv[j][k] for j in range(3)) for k in range(2)]
    np.testing.assert_allclose(attention_aggregate(Tensor(cv), Tensor(q)).data, o, atol=1e-10)


def test_attention_shape_error(rng):
    with pytest.raises(ShapeMismatch):
        attention_aggregate(Tensor(rng.standard_normal((3, 4))), Tensor(rng.standard_normal(3)))


# ----------------------------------------------------------------- structure


@pytest.mark.parametrize("w, L, rf", [(2, 1, 2), (5, 2, 9), (8, 3, 29)])
def test_receptive_field(w, L, rf):
    spec = ModelSpec(kernel_width=w, conv_blocks=L)
    assert receptive_field(spec) == rf
    assert measure_receptive_field(spec) == rf


def test_receptive_field_monotone():
    for w in range(2, 9):
        for L in range(1, 6):
            rf = receptive_field(ModelSpec(kernel_width=w, conv_blocks=L))
            assert rf <= receptive_field(ModelSpec(kernel_width=w + 1, conv_blocks=L))
            assert rf <= receptive_field(ModelSpec(kernel_width=w, conv_blocks=L + 1))


def test_dilation_schedule():
    assert dilations(ModelSpec(conv_blocks=1)) == [1]
    assert dilations(ModelSpec(conv_blocks=4)) == [1, 1, 2, 4]


def test_layer_plan_default_shapes():
    plan = {name: (shape, kind) for name, shape, kind in layer_plan(ModelSpec())}
    assert plan["gru.b1.fwd.wx"] == ((1, 192), "param")
    assert plan["lstm.b2.bwd.wh"] == ((128, 512), "param")
    assert plan["conv1.w"] == ((64, 512, 8), "param")
    assert plan["conv3.running_var"] == ((64,), "buffer")
    assert plan["routing.w"] == ((6, 64, 64), "param")
    assert plan["attention.q"] == ((64,), "param")
    assert plan["head.w"] == ((64, 5), "param")


def test_spec_validation():
    with pytest.raises(SpecError):
        ModelSpec(target_convs=4, classes=5)
    with pytest.raises(SpecError):
        ModelSpec(kernel_width=1)
    assert ModelSpec.from_dict(MICRO.to_dict()) == MICRO


# ----------------------------------------------------------------- init and predict


def test_same_seed_same_init():
    a, b = build_model(MICRO, 3).state(), build_model(MICRO, 3).state()
    assert all(a[k].tobytes() == b[k].tobytes() for k in a)
    c = build_model(MICRO, 4).state()
    assert any(a[k].tobytes() != c[k].tobytes() for k in a)


def test_init_values_are_float32_and_bounded():
    for name, arr in build_model(MICRO, 0).state().items():
        np.testing.assert_array_equal(arr, arr.astype(np.float32))
        if name.endswith(".wx"):
            assert np.abs(arr).max() <= 1.0


def test_predict_golden_vector():
    np.testing.assert_allclose(predict(build_model(MICRO, 7), GOLDEN_BEAT), GOLDEN_PROBS, rtol=0, atol=1e-12)


def test_predict_is_probability_and_deterministic(rng):
    m = build_model(MICRO, 1)
    for scale in (1e-3, 1.0, 50.0):
        beat = rng.standard_normal(16) * scale
        p = predict(m, beat)
        assert p.shape == (5,)
        assert abs(p.sum() - 1) <= 1e-9
        assert predict(m, beat).tobytes() == p.tobytes()


def test_predict_shape_error():
    with pytest.raises(ShapeMismatch):
        predict(build_model(MICRO, 0), np.zeros(15))


def test_orphan_targets_have_no_logit():
    spec = ModelSpec(**{**MICRO.to_dict(), "target_convs": 7})
    assert predict(build_model(spec, 0), GOLDEN_BEAT).shape == (5,)


# ----------------------------------------------------------------- training


def _small_ds(n=40):
    return toy_beats(n, 16, seed=2)


def test_lr_zero_keeps_weights_bit_exact():
    m = build_model(MICRO, 0)
    before = {k: v.data.copy() for k, v in m.params.items()}
    train(m, _small_ds(), TrainHyper(epochs=2, lr=0.0))
    for k, v in m.params.items():
        assert v.data.tobytes() == before[k].tobytes(), k


def test_training_permutation_invariant():
    ds = _small_ds()
    perm = np.random.default_rng(9).permutation(len(ds))
    shuffled = BeatDataset(ds.beats[perm], ds.labels[perm], ds.segment_len)
    h = TrainHyper(epochs=2, seed=3)
    a = train(build_model(MICRO, 0), ds, h)
    b = train(build_model(MICRO, 0), shuffled, h)
    assert a.history == b.history
    assert checkpoint_bytes(a) == checkpoint_bytes(b)


def test_training_reduces_loss():
    ck = train(build_model(MICRO, 0), _small_ds(80), TrainHyper(epochs=8, lr=1e-2))
    assert ck.history[-1][0] < ck.history[0][0]


def test_target_accuracy_stops_early():
    ck = train(build_model(MICRO, 0), _small_ds(), TrainHyper(epochs=5, target_accuracy=0.0))
    assert len(ck.history) == 1


def test_train_errors():
    with pytest.raises(EmptyDataset):
        train(build_model(MICRO, 0), BeatDataset.empty(16))
    ds = _small_ds()
    with pytest.raises(ShapeMismatch):
        train(build_model(MICRO, 0), toy_beats(20, 32))
    bad = BeatDataset(ds.beats, np.full(len(ds), 7), 16)
    with pytest.raises(DataError):
        train(build_model(MICRO, 0), bad)


def test_checkpoint_round_trip(tmp_path):
    ck = train(build_model(MICRO, 0), _small_ds(), TrainHyper(epochs=1))
    data = checkpoint_bytes(ck)
    back = checkpoint_from_bytes(data)
    assert back.spec == MICRO
    assert back.history == ck.history
    assert checkpoint_bytes(back) == data
    np.testing.assert_array_equal(back.model().predict_proba(_small_ds().beats), ck.model().predict_proba(_small_ds().beats))


def test_checkpoint_rejects_garbage():
    with pytest.raises(DataError):
        checkpoint_from_bytes(b"not a checkpoint")
    other = Checkpoint(ModelSpec(**{**MICRO.to_dict(), "filters": 4}), build_model(MICRO, 0).state())
    with pytest.raises((DataError, ShapeMismatch)):
        checkpoint_from_bytes(checkpoint_bytes(other))


def test_history_csv():
    assert history_csv([(0.5, 0.25), (0.125, 1.0)]) == "epoch,loss,accuracy\n1,0.5,0.25\n2,0.125,1\n"
