from .tensor import Tensor, Parameter, Function, no_grad, is_grad_enabled, DEFAULT_DTYPE
from .ops import (
    conv2d,
    maxpool2d,
    upsample_nearest2x,
    concat_channels,
    relu,
    sigmoid,
    sum_all,
    bce_loss,
    bce_with_logits,
    BCE_CLAMP,
    LOGIT_CLAMP,
)
from .optim import Adam, AdamHyper, AdamState, adam_step
from .gradcheck import numerical_gradient, relative_error, check_gradients

__all__ = [
    "Tensor",
    "Parameter",
    "Function",
    "no_grad",
    "is_grad_enabled",
    "DEFAULT_DTYPE",
    "conv2d",
    "maxpool2d",
    "upsample_nearest2x",
    "concat_channels",
    "relu",
    "sigmoid",
    "sum_all",
    "bce_loss",
    "bce_with_logits",
    "BCE_CLAMP",
    "LOGIT_CLAMP",
    "Adam",
    "AdamHyper",
    "AdamState",
    "adam_step",
    "numerical_gradient",
    "relative_error",
    "check_gradients",
]
