from .model import (DeepOnetBaseline, DeepOnetConfig, PintoConfig, PintoModel, attention_scores,
                    cau_forward, deeponet_forward, init_params, pinto_forward)
from .quadrature import kernel_integral_quadrature_check, midpoint_tokens

__all__ = [
    "DeepOnetBaseline", "DeepOnetConfig", "PintoConfig", "PintoModel", "attention_scores",
    "cau_forward", "deeponet_forward", "init_params", "pinto_forward",
    "kernel_integral_quadrature_check", "midpoint_tokens",
]
