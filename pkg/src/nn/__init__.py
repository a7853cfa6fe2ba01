from src.nn.autograd import Tensor, backward, no_grad
from src.nn.layers import (EmbeddingNet, LayerNorm, Linear, Module, SelfAttention, attention_forward,
                           layernorm_forward, linear_forward, mse_loss)
from src.nn.optim import Adam, AdamState, adam_step

__all__ = [
    "Tensor", "backward", "no_grad",
    "Module", "Linear", "LayerNorm", "SelfAttention", "EmbeddingNet",
    "linear_forward", "layernorm_forward", "attention_forward", "mse_loss",
    "Adam", "AdamState", "adam_step",
]
