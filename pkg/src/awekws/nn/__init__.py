from .tensor import (
    Tensor,
    broadcast_to,
    concat,
    masked_softmax,
    softmax,
)
from .layers import (
    GRU_GATES,
    LAYER_NORM_EPS,
    PaddedBatch,
    gelu,
    gru_step,
    layer_norm,
    linear,
    multi_head_attention,
    sinusoidal_positions,
)
from .params import ParameterStore, load_checkpoint, save_checkpoint
from .optim import Adam
from .gradcheck import FD_STEP, REL_FLOOR, max_relative_error, numeric_gradient

__all__ = [
    "Adam",
    "FD_STEP",
    "GRU_GATES",
    "LAYER_NORM_EPS",
    "gelu",
    "PaddedBatch",
    "ParameterStore",
    "REL_FLOOR",
    "Tensor",
    "broadcast_to",
    "concat",
    "gru_step",
    "layer_norm",
    "linear",
    "load_checkpoint",
    "masked_softmax",
    "max_relative_error",
    "multi_head_attention",
    "numeric_gradient",
    "save_checkpoint",
    "sinusoidal_positions",
    "softmax",
]
