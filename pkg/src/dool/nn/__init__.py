from .adam import AdamState, adam_step
from .autodiff import Var, value
from .mlp import (
    LayerShape,
    NetParams,
    load_netparams,
    loss_gradient,
    mlp_shapes,
    net_forward,
    net_forward_tangents,
    net_init,
    save_checkpoint,
    value_and_grad,
)

__all__ = [
    "AdamState",
    "LayerShape",
    "NetParams",
    "Var",
    "adam_step",
    "load_netparams",
    "loss_gradient",
    "mlp_shapes",
    "net_forward",
    "net_forward_tangents",
    "net_init",
    "save_checkpoint",
    "value",
    "value_and_grad",
]
