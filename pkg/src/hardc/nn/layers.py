"""Differentiable layers used by the classifier and the GAN.

Sequence tensors are time-major per sample: ``[B, T, C]``. Unbatched
``[T, C]`` inputs are accepted where noted and treated as a batch of one.
"""

from __future__ import annotations

import numpy as np

from ..errors import NumericError, ShapeMismatch
from .tensor import Tensor, _make, _sigmoid, as_tensor, matmul, mean, mul, tmax

# ----------------------------------------------------------------- conv


def conv1d_dilated(x: Tensor, w: Tensor, dilation: int = 1, padding: str = "causal") -> Tensor:
    """y[t, o] = sum_{k, c} w[o, c, k] * x[t - (K-1-k) * dilation, c].

    ``causal`` zero-pads (K-1)*dilation samples on the left; ``same`` splits
    that padding symmetrically (extra sample on the right). Output length
    equals input length.
    """
    x = as_tensor(x)
    w = as_tensor(w)
    if dilation < 1:
        raise ShapeMismatch("dilation must be >= 1")
    squeeze = x.ndim == 2
    xd = x.data[None] if squeeze else x.data
    if xd.ndim != 3 or w.ndim != 3 or w.shape[1] != xd.shape[2]:
        raise ShapeMismatch(f"conv1d input {x.shape} incompatible with kernel {w.shape}")
    B, T, C = xd.shape
    O, _, K = w.shape
    span = (K - 1) * dilation
    left = span if padding == "causal" else span // 2
    if padding not in ("causal", "same"):
        raise ValueError(f"unknown padding {padding!r}")
    xp = np.zeros((B, T + span, C))
    xp[:, left : left + T] = xd
    wd = w.data
    # contiguous per-tap matrices keep every product on the BLAS fast path
    taps = np.ascontiguousarray(wd.transpose(2, 1, 0))  # [K, C, O]
    y = np.zeros((B, T, O))
    for k in range(K):
        y += xp[:, k * dilation : k * dilation + T] @ taps[k]

    def bw(g):
        g3 = g[None] if squeeze else g
        gw = np.empty_like(wd)
        gxp = np.zeros_like(xp)
        g2 = np.ascontiguousarray(g3.reshape(-1, O).T)
        taps_t = np.ascontiguousarray(wd.transpose(2, 0, 1))  # [K, O, C]
        for k in range(K):
            win = xp[:, k * dilation : k * dilation + T]
            gw[:, :, k] = g2 @ win.reshape(-1, C)
            gxp[:, k * dilation : k * dilation + T] += g3 @ taps_t[k]
        gx = gxp[:, left : left + T]
        return (gx[0] if squeeze else gx), gw

    return _make(y[0] if squeeze else y, (x, w), bw)


def conv1d_forward_numpy(x: np.ndarray, w: np.ndarray, dilation: int = 1) -> np.ndarray:
    """Tape-free causal conv, same arithmetic as :func:`conv1d_dilated` (used by the benchmark)."""
    B, T, C = x.shape
    O, _, K = w.shape
    span = (K - 1) * dilation
    xp = np.zeros((B, T + span, C))
    xp[:, span:] = x
    taps = np.ascontiguousarray(w.transpose(2, 1, 0))
    y = np.zeros((B, T, O))
    for k in range(K):
        y += xp[:, k * dilation : k * dilation + T] @ taps[k]
    return y


# ----------------------------------------------------------------- recurrent


def _batch(x: Tensor):
    if x.ndim == 2:
        return x.data[None], True
    if x.ndim != 3:
        raise ShapeMismatch(f"recurrent input must be [T, D] or [B, T, D], got {x.shape}")
    return x.data, False


def gru_direction(x: Tensor, wx: Tensor, wh: Tensor, b: Tensor, reverse: bool = False) -> Tensor:
    """One GRU direction over ``[B, T, D]``; gate order (update, reset, candidate).

    z = s(x Wz + h Uz + bz), r = s(x Wr + h Ur + br),
    n = tanh(x Wn + (r * h) Un + bn), h' = (1 - z) * h + z * n.
    """
    xd, squeeze = _batch(x)
    B, T, D = xd.shape
    U = wh.shape[0]
    if wx.shape != (D, 3 * U) or wh.shape != (U, 3 * U) or b.shape != (3 * U,):
        raise ShapeMismatch("GRU parameter shapes inconsistent with input")
    xs = xd[:, ::-1] if reverse else xd
    # time-major buffers so each step touches contiguous [B, U] blocks
    A = np.ascontiguousarray((xs @ wx.data + b.data).transpose(1, 0, 2))
    Wzr = np.ascontiguousarray(wh.data[:, : 2 * U])
    Wn = np.ascontiguousarray(wh.data[:, 2 * U :])
    hs = np.zeros((T + 1, B, U))
    zs = np.empty((T, B, U))
    rs = np.empty((T, B, U))
    ns = np.empty((T, B, U))
    for t in range(T):
        h = hs[t]
        zr = _sigmoid(A[t, :, : 2 * U] + h @ Wzr)
        z, r = zr[:, :U], zr[:, U:]
        n = np.tanh(A[t, :, 2 * U :] + (r * h) @ Wn)
        hs[t + 1] = (1 - z) * h + z * n
        zs[t], rs[t], ns[t] = z, r, n
    out = hs[1:].transpose(1, 0, 2)
    if reverse:
        out = out[:, ::-1]

    def bw(g):
        g = g[None] if squeeze else g
        if reverse:
            g = g[:, ::-1]
        g = np.ascontiguousarray(g.transpose(1, 0, 2))
        dA = np.empty((T, B, 3 * U))
        dWh = np.zeros((U, 3 * U))
        WnT = np.ascontiguousarray(Wn.T)
        WzrT = np.ascontiguousarray(Wzr.T)
        dh = np.zeros((B, U))
        for t in range(T - 1, -1, -1):
            h = hs[t]
            z, r, n = zs[t], rs[t], ns[t]
            dh = dh + g[t]
            dn = dh * z
            dz = dh * (n - h)
            dh_prev = dh * (1 - z)
            dan = dn * (1 - n**2)
            dWh[:, 2 * U :] += (r * h).T @ dan
            drh = dan @ WnT
            dh_prev += drh * r
            dzr = np.concatenate([dz * z * (1 - z), drh * h * r * (1 - r)], axis=1)
            dWh[:, : 2 * U] += h.T @ dzr
            dh_prev += dzr @ WzrT
            dA[t, :, : 2 * U] = dzr
            dA[t, :, 2 * U :] = dan
            dh = dh_prev
        dA = dA.transpose(1, 0, 2)
        dWx = xs.reshape(-1, D).T @ dA.reshape(-1, 3 * U)
        db = dA.sum(axis=(0, 1))
        dx = dA @ np.ascontiguousarray(wx.data.T)
        if reverse:
            dx = dx[:, ::-1]
        return (dx[0] if squeeze else dx), dWx, dWh, db

    return _make(np.ascontiguousarray(out[0] if squeeze else out), (x, wx, wh, b), bw)


def lstm_direction(x: Tensor, wx: Tensor, wh: Tensor, b: Tensor, reverse: bool = False) -> Tensor:
    """One LSTM direction; gate order (input, forget, cell, output).

    c' = f * c + i * g, h' = o * tanh(c').
    """
    xd, squeeze = _batch(x)
    B, T, D = xd.shape
    U = wh.shape[0]
    if wx.shape != (D, 4 * U) or wh.shape != (U, 4 * U) or b.shape != (4 * U,):
        raise ShapeMismatch("LSTM parameter shapes inconsistent with input")
    xs = xd[:, ::-1] if reverse else xd
    A = np.ascontiguousarray((xs @ wx.data + b.data).transpose(1, 0, 2))
    W = wh.data
    hs = np.zeros((T + 1, B, U))
    cs = np.zeros((T + 1, B, U))
    gates = np.empty((T, B, 4 * U))
    for t in range(T):
        pre = A[t] + hs[t] @ W
        gt = gates[t]
        gt[:, : 2 * U] = _sigmoid(pre[:, : 2 * U])
        gt[:, 2 * U : 3 * U] = np.tanh(pre[:, 2 * U : 3 * U])
        gt[:, 3 * U :] = _sigmoid(pre[:, 3 * U :])
        cs[t + 1] = gt[:, U : 2 * U] * cs[t] + gt[:, :U] * gt[:, 2 * U : 3 * U]
        hs[t + 1] = gt[:, 3 * U :] * np.tanh(cs[t + 1])
    out = hs[1:].transpose(1, 0, 2)
    if reverse:
        out = out[:, ::-1]

    def bw(g):
        g = g[None] if squeeze else g
        if reverse:
            g = g[:, ::-1]
        g = np.ascontiguousarray(g.transpose(1, 0, 2))
        dA = np.empty((T, B, 4 * U))
        dW = np.zeros_like(W)
        WT = np.ascontiguousarray(W.T)
        dh = np.zeros((B, U))
        dc = np.zeros((B, U))
        for t in range(T - 1, -1, -1):
            gt = gates[t]
            i, f, gg, o = gt[:, :U], gt[:, U : 2 * U], gt[:, 2 * U : 3 * U], gt[:, 3 * U :]
            tc = np.tanh(cs[t + 1])
            dh = dh + g[t]
            dc = dc + dh * o * (1 - tc**2)
            dpre = dA[t]
            dpre[:, :U] = dc * gg * i * (1 - i)
            dpre[:, U : 2 * U] = dc * cs[t] * f * (1 - f)
            dpre[:, 2 * U : 3 * U] = dc * i * (1 - gg**2)
            dpre[:, 3 * U :] = dh * tc * o * (1 - o)
            dW += hs[t].T @ dpre
            dh = dpre @ WT
            dc = dc * f
        dA = dA.transpose(1, 0, 2)
        dWx = xs.reshape(-1, D).T @ dA.reshape(-1, 4 * U)
        db = dA.sum(axis=(0, 1))
        dx = dA @ np.ascontiguousarray(wx.data.T)
        if reverse:
            dx = dx[:, ::-1]
        return (dx[0] if squeeze else dx), dWx, dW, db

    return _make(np.ascontiguousarray(out[0] if squeeze else out), (x, wx, wh, b), bw)


def _bidirectional(cell, x: Tensor, params: dict, prefix: str) -> Tensor:
    from .tensor import concat

    fwd = cell(x, params[f"{prefix}fwd.wx"], params[f"{prefix}fwd.wh"], params[f"{prefix}fwd.b"])
    bwd = cell(
        x, params[f"{prefix}bwd.wx"], params[f"{prefix}bwd.wh"], params[f"{prefix}bwd.b"], reverse=True
    )
    return concat([fwd, bwd], axis=-1)


def bigru_forward(x: Tensor, params: dict, prefix: str = "") -> Tensor:
    """[T, D] or [B, T, D] -> [..., T, 2U]: forward states then backward states."""
    return _bidirectional(gru_direction, as_tensor(x), params, prefix)


def bilstm_forward(x: Tensor, params: dict, prefix: str = "") -> Tensor:
    return _bidirectional(lstm_direction, as_tensor(x), params, prefix)


# ----------------------------------------------------------------- activations / heads


def softmax(z: Tensor, axis: int = -1) -> Tensor:
    z = as_tensor(z)
    if not np.all(np.isfinite(z.data)):
        raise NumericError("softmax of non-finite input")
    e = np.exp(z.data - z.data.max(axis=axis, keepdims=True))
    s = e / e.sum(axis=axis, keepdims=True)
    return _make(s, (z,), lambda g: (s * (g - (g * s).sum(axis=axis, keepdims=True)),))


PROB_CLIP = 1e-12


def cross_entropy(p: Tensor, y) -> Tensor:
    """Mean of -log p[y] with probabilities clipped to [1e-12, 1 - 1e-12]."""
    p = as_tensor(p)
    y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    pd = p.data[None] if p.ndim == 1 else p.data
    if pd.shape[0] != y.shape[0]:
        raise ShapeMismatch("probabilities and labels disagree on batch size")
    rows = np.arange(y.shape[0])
    picked = pd[rows, y]
    clipped = np.clip(picked, PROB_CLIP, 1 - PROB_CLIP)
    loss = -np.log(clipped).mean()
    live = (picked >= PROB_CLIP) & (picked <= 1 - PROB_CLIP)

    def bw(g):
        full = np.zeros_like(pd)
        full[rows, y] = -g * live / clipped / y.shape[0]
        return (full[0] if p.ndim == 1 else full,)

    return _make(np.asarray(loss), (p,), bw)


def dense(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    out = matmul(x, w)
    return out + b if b is not None else out


def squash(s: Tensor, axis: int = -1, eps: float = 1e-18) -> Tensor:
    """(|s|^2 / (1 + |s|^2)) * s / |s|; maps any vector strictly inside the unit ball."""
    s = as_tensor(s)
    sd = s.data
    n2 = (sd**2).sum(axis=axis, keepdims=True)
    n = np.sqrt(n2 + eps)
    scale = n2 / (1 + n2) / n
    out = sd * scale

    def bw(g):
        # d scale / d n2 for scale = n2 / ((1 + n2) * sqrt(n2 + eps))
        dscale_dn2 = scale * (1.0 / np.maximum(n2, 1e-300) * (n2 > 0) - 1.0 / (1 + n2) - 0.5 / (n2 + eps))
        gs = (g * sd).sum(axis=axis, keepdims=True)
        return (g * scale + 2 * sd * gs * dscale_dn2,)

    return _make(out, (s,), bw)


# ----------------------------------------------------------------- normalization / pooling / dropout


BN_EPS = 1e-8


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running: dict | None = None,
    training: bool = True,
    momentum: float = 0.1,
    eps: float = BN_EPS,
) -> Tensor:
    """Normalize over every axis but the last (features).

    In training mode batch statistics are used and ``running['mean']`` /
    ``running['var']`` are updated in place (biased variance).
    """
    x = as_tensor(x)
    axes = tuple(range(x.ndim - 1))
    if gamma.shape != (x.shape[-1],) or beta.shape != (x.shape[-1],):
        raise ShapeMismatch("batch_norm affine parameters do not match feature count")
    if not training:
        mu = running["mean"]
        var = running["var"]
        inv = 1.0 / np.sqrt(var + eps)
        xhat = (x.data - mu) * inv
        out = gamma.data * xhat + beta.data

        def bw_eval(g):
            return g * gamma.data * inv, (g * xhat).sum(axis=axes), g.sum(axis=axes)

        return _make(out, (x, gamma, beta), bw_eval)

    m = int(np.prod([x.shape[a] for a in axes]))
    mu = x.data.mean(axis=axes)
    var = x.data.var(axis=axes)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = gamma.data * xhat + beta.data
    if running is not None:
        running["mean"] = (1 - momentum) * running["mean"] + momentum * mu
        running["var"] = (1 - momentum) * running["var"] + momentum * var

    def bw(g):
        dxhat = g * gamma.data
        dx = inv / m * (m * dxhat - dxhat.sum(axis=axes) - xhat * (dxhat * xhat).sum(axis=axes))
        return dx, (g * xhat).sum(axis=axes), g.sum(axis=axes)

    return _make(out, (x, gamma, beta), bw)


def max_pool(x: Tensor, k: int, axis: int = -2) -> Tensor:
    """Non-overlapping max over windows of ``k`` along ``axis``; ragged tail padded with -inf."""
    from .tensor import pad, reshape

    x = as_tensor(x)
    axis = axis % x.ndim
    n = x.shape[axis]
    extra = (-n) % k
    if extra:
        widths = [(0, 0)] * x.ndim
        widths[axis] = (0, extra)
        # -inf padding never wins the max; use a large finite stand-in so the
        # finiteness check on intermediate tensors holds
        x = pad(x, widths, value=-1e300)
    shape = list(x.shape)
    shape[axis : axis + 1] = [shape[axis] // k, k]
    return tmax(reshape(x, tuple(shape)), axis=axis + 1)


def global_avg_pool(x: Tensor, axis: int = -2) -> Tensor:
    return mean(x, axis=axis)


def dropout(x: Tensor, rate: float, rng: np.random.Generator | int | None = None, mode: str = "train") -> Tensor:
    """Inverted dropout: train mode scales survivors by 1/(1-rate); eval is identity."""
    x = as_tensor(x)
    if mode == "eval" or rate == 0:
        return x
    if mode != "train":
        raise ValueError(f"dropout mode must be 'train' or 'eval', got {mode!r}")
    if not 0 <= rate < 1:
        raise ValueError("dropout rate must lie in [0, 1)")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    mask = (rng.random(x.shape) >= rate) / (1 - rate)
    return mul(x, mask)
