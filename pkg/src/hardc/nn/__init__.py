"""Minimal dense-tensor math with reverse-mode gradients."""

from .gradcheck import check_gradients, numerical_grad, relative_error
from .layers import (
    batch_norm,
    bigru_forward,
    bilstm_forward,
    conv1d_dilated,
    cross_entropy,
    dense,
    dropout,
    global_avg_pool,
    gru_direction,
    lstm_direction,
    max_pool,
    softmax,
    squash,
)
from .optim import AdamState, adam_step, to_f32
from .serialize import read_blob, read_checkpoint, write_blob, write_checkpoint
from .tensor import Tensor, backward, concat, einsum, relu, sigmoid, tanh

__all__ = [
    "AdamState",
    "Tensor",
    "adam_step",
    "backward",
    "batch_norm",
    "bigru_forward",
    "bilstm_forward",
    "check_gradients",
    "concat",
    "conv1d_dilated",
    "cross_entropy",
    "dense",
    "dropout",
    "einsum",
    "global_avg_pool",
    "gru_direction",
    "lstm_direction",
    "max_pool",
    "numerical_grad",
    "read_blob",
    "read_checkpoint",
    "relative_error",
    "relu",
    "sigmoid",
    "softmax",
    "squash",
    "tanh",
    "to_f32",
    "write_blob",
    "write_checkpoint",
]
