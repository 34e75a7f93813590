"""The beat classifier: spec, network, training, checkpoints."""

from .network import (
    Model,
    RoutingTrace,
    attention_aggregate,
    attention_weights,
    build_model,
    measure_receptive_field,
    predict,
    routing,
)
from .spec import ModelSpec, dilations, layer_plan, receptive_field
from .train import (
    Checkpoint,
    TrainHyper,
    checkpoint_bytes,
    checkpoint_from_bytes,
    history_csv,
    load_checkpoint,
    save_checkpoint,
    train,
)

__all__ = [
    "Checkpoint",
    "Model",
    "ModelSpec",
    "RoutingTrace",
    "TrainHyper",
    "attention_aggregate",
    "attention_weights",
    "build_model",
    "checkpoint_bytes",
    "checkpoint_from_bytes",
    "dilations",
    "history_csv",
    "layer_plan",
    "load_checkpoint",
    "measure_receptive_field",
    "predict",
    "receptive_field",
    "routing",
    "save_checkpoint",
    "train",
]
