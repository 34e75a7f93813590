"""The classifier: recurrent fusion, dilated convs, routing, attention, softmax head."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatch
from ..nn import layers as L
from ..nn.optim import to_f32
from ..nn.tensor import Tensor, as_tensor, concat, einsum, mul, relu, reshape
from .spec import ModelSpec, dilations, layer_plan, rnn_blocks


@dataclass
class RoutingTrace:
    couplings: list[np.ndarray] = field(default_factory=list)  # c after each softmax
    logits: list[np.ndarray] = field(default_factory=list)  # b after each update


def routing(rv: Tensor, w: Tensor, iters: int, trace: RoutingTrace | None = None) -> Tensor:
    """Route input vectors rv [n, d] (or [B, n, d]) to M target vectors via W [M, d, d_v].

    Predictions r[i, j] = rv_i @ W_j; logits b start at zero; each iteration
    sets c = softmax_j(b), s_j = sum_i c_ij r[i, j], cv_j = squash(s_j), and
    adds the agreement cv_j . r[i, j] to b. Returns the final cv [M, d_v].
    """
    rv = as_tensor(rv)
    w = as_tensor(w)
    squeeze = rv.ndim == 2
    if squeeze:
        rv = reshape(rv, (1,) + rv.shape)
    if rv.ndim != 3 or w.ndim != 3 or rv.shape[2] != w.shape[1]:
        raise ShapeMismatch(f"routing inputs {rv.shape} incompatible with transform {w.shape}")
    if iters < 1:
        raise ShapeMismatch("routing needs at least one iteration")
    B, n, _ = rv.shape
    M = w.shape[0]
    pred = einsum("bnd,mde->bnme", rv, w)
    b = Tensor(np.zeros((B, n, M)))
    cv = None
    for it in range(iters):
        c = L.softmax(b, axis=2)
        if trace is not None:
            trace.couplings.append(c.data[0].copy() if squeeze else c.data.copy())
        s = einsum("bnm,bnme->bme", c, pred)
        cv = L.squash(s, axis=-1)
        if it < iters - 1 or trace is not None:
            b = b + einsum("bme,bnme->bnm", cv, pred)
            if trace is not None:
                trace.logits.append(b.data[0].copy() if squeeze else b.data.copy())
    if squeeze:
        cv = reshape(cv, cv.shape[1:])
    return cv


def attention_weights(cv: Tensor, q: Tensor) -> Tensor:
    """alpha = softmax_j(q . cv_j) over the target axis (second to last)."""
    cv = as_tensor(cv)
    q = as_tensor(q)
    if q.ndim != 1 or cv.shape[-1] != q.shape[0]:
        raise ShapeMismatch(f"query {q.shape} incompatible with target vectors {cv.shape}")
    sub = "me,e->m" if cv.ndim == 2 else "bme,e->bm"
    return L.softmax(einsum(sub, cv, q), axis=-1)


def attention_aggregate(cv: Tensor, q: Tensor) -> Tensor:
    """o = sum_j alpha_j cv_j with alpha = softmax(q . cv_j)."""
    cv = as_tensor(cv)
    alpha = attention_weights(cv, q)
    sub = "m,me->e" if cv.ndim == 2 else "bm,bme->be"
    return einsum(sub, alpha, cv)


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    lim = 1.0 / np.sqrt(fan_in)
    return to_f32(rng.uniform(-lim, lim, size=shape))


class Model:
    """Parameters (Tensors), batch-norm running buffers, and the forward pass."""

    def __init__(self, spec: ModelSpec, params: dict[str, Tensor], buffers: dict[str, np.ndarray]):
        self.spec = spec
        self.params = params
        self.buffers = buffers
        self._running = {
            l: {"mean": buffers[f"conv{l}.running_mean"], "var": buffers[f"conv{l}.running_var"]}
            for l in range(1, spec.conv_blocks + 1)
        }

    def _sync_buffers(self) -> None:
        for l, run in self._running.items():
            self.buffers[f"conv{l}.running_mean"] = run["mean"]
            self.buffers[f"conv{l}.running_var"] = run["var"]

    def state(self) -> dict[str, np.ndarray]:
        """All stored tensors in layer-plan order."""
        self._sync_buffers()
        out = {}
        for name, _, kind in layer_plan(self.spec):
            out[name] = self.params[name].data if kind == "param" else self.buffers[name]
        return out

    def load_state(self, tensors: dict[str, np.ndarray]) -> None:
        for name, shape, kind in layer_plan(self.spec):
            arr = np.asarray(tensors[name], dtype=np.float64)
            if arr.shape != shape:
                raise ShapeMismatch(f"{name}: stored shape {arr.shape}, expected {shape}")
            if kind == "param":
                self.params[name] = Tensor(arr.copy(), requires_grad=True, name=name)
            else:
                self.buffers[name] = arr.copy()
        self.__init__(self.spec, self.params, self.buffers)

    def features(self, x: Tensor, training: bool = False) -> Tensor:
        """Recurrent branches and conv stack: [B, T] -> [B, T, filters]."""
        spec = self.spec
        p = self.params
        h0 = as_tensor(x)
        if h0.ndim != 2 or h0.shape[1] != spec.segment_len:
            raise ShapeMismatch(f"expected beats of shape [B, {spec.segment_len}], got {h0.shape}")
        h0 = reshape(h0, h0.shape + (1,))
        branches = []
        for branch, fn in (("gru", L.bigru_forward), ("lstm", L.bilstm_forward)):
            h = h0
            for i in range(1, len(rnn_blocks(spec)) + 1):
                h = fn(h, p, prefix=f"{branch}.b{i}.")
            branches.append(h)
        h = concat(branches, axis=-1)
        for l, d in enumerate(dilations(spec), start=1):
            h = L.conv1d_dilated(h, p[f"conv{l}.w"], dilation=d, padding="causal")
            h = L.batch_norm(h, p[f"conv{l}.gamma"], p[f"conv{l}.beta"], self._running[l], training=training)
            h = relu(h)
        return h

    def forward(
        self,
        x,
        training: bool = False,
        rng: np.random.Generator | None = None,
        trace: dict | None = None,
    ) -> Tensor:
        """Class probabilities [B, classes] for beats [B, segment_len]."""
        spec = self.spec
        p = self.params
        feats = self.features(x, training=training)
        rtrace = RoutingTrace() if trace is not None else None
        cv = routing(feats, p["routing.w"], spec.routing_iters, rtrace)
        alpha = attention_weights(cv, p["attention.q"])
        # attention-weighted target maps, scaled by M so their mean over targets is o
        z = mul(einsum("bm,bme->bme", alpha, cv), float(spec.target_convs))
        pooled = L.global_avg_pool(L.max_pool(z, 2, axis=1), axis=1)
        pooled = L.dropout(pooled, spec.dropout, rng, mode="train" if training else "eval")
        probs = L.softmax(L.dense(pooled, p["head.w"], p["head.b"]), axis=-1)
        if trace is not None:
            trace["routing"] = rtrace
            trace["cv"] = cv.data
            trace["alpha"] = alpha.data
            trace["o"] = einsum("bm,bme->be", alpha, cv).data
            trace["features"] = feats.data
        return probs

    def predict_proba(self, beats, batch: int = 256) -> np.ndarray:
        beats = np.asarray(beats, dtype=np.float64)
        if beats.ndim != 2:
            raise ShapeMismatch("predict_proba expects [n, segment_len]")
        if beats.shape[0] == 0:
            return np.zeros((0, self.spec.classes))
        out = [self.forward(beats[i : i + batch]).data for i in range(0, len(beats), batch)]
        return np.concatenate(out, axis=0)


def build_model(spec: ModelSpec, seed: int = 0) -> Model:
    """Fresh model; weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0,
    batch-norm scale 1, all rounded to float32 values."""
    rng = np.random.default_rng([seed, 0])
    params: dict[str, Tensor] = {}
    buffers: dict[str, np.ndarray] = {}
    for name, shape, kind in layer_plan(spec):
        leaf = name.rsplit(".", 1)[1]
        if kind == "buffer":
            buffers[name] = np.ones(shape) if leaf == "running_var" else np.zeros(shape)
            continue
        if leaf in ("b", "beta"):
            data = np.zeros(shape)
        elif leaf == "gamma":
            data = np.ones(shape)
        elif leaf in ("wx", "wh"):
            data = _uniform(rng, shape, shape[0])
        elif name.startswith("conv"):
            data = _uniform(rng, shape, shape[1] * shape[2])
        elif name == "routing.w":
            data = _uniform(rng, shape, shape[1])
        else:  # attention.q, head.w
            data = _uniform(rng, shape, shape[0])
        params[name] = Tensor(data, requires_grad=True, name=name)
    return Model(spec, params, buffers)


def predict(model: Model, beat) -> np.ndarray:
    """Eval-mode class probabilities for one beat."""
    beat = np.asarray(beat, dtype=np.float64)
    if beat.shape != (model.spec.segment_len,):
        raise ShapeMismatch(f"beat length {beat.shape} != segment_len {model.spec.segment_len}")
    return model.forward(beat[None]).data[0]


def measure_receptive_field(spec: ModelSpec) -> int:
    """Impulse support of the dilated conv stack, measured by running it.

    Uses all-ones kernels so no cancellation can hide a tap; batch norm and
    the recurrent front end are left out since they do not mix time steps
    (batch norm) or would make the support unbounded (recurrence).
    """
    T = 4 * (spec.kernel_width - 1) * 2 ** (spec.conv_blocks) + 8
    x = np.zeros((1, T, 1))
    x[0, T // 4, 0] = 1.0
    h = Tensor(x)
    for d in dilations(spec):
        h = L.conv1d_dilated(h, Tensor(np.ones((1, 1, spec.kernel_width))), dilation=d, padding="causal")
    return int(np.count_nonzero(h.data[0, :, 0]))
