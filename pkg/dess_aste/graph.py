"""Graph convolution over the dependency and attention-derived adjacencies."""

from typing import Sequence

import torch
import torch.nn.functional as F
from torch import nn

from .config import GcnConfig
from .errors import NumericalFault


def row_normalize(adjacency: torch.Tensor) -> torch.Tensor:
    row_sums = adjacency.sum(dim=-1, keepdim=True)
    if not bool((row_sums > 0).all()):
        row = int((row_sums <= 0).nonzero()[0, -2])
        raise NumericalFault("adjacency row sums to zero; cannot normalize", location=f"row={row}")
    return adjacency / row_sums


class GCN(nn.Module):
    """
    Stack of H' = relu(rownorm(A) H W + b)

    Inputs wider or narrower than hidden_dim are first projected to it.
    """

    def __init__(self, input_dim: int, config: GcnConfig):
        super().__init__()
        self.config = config
        self.input_proj = nn.Linear(input_dim, config.hidden_dim) if input_dim != config.hidden_dim else nn.Identity()
        self.layers = nn.ModuleList(nn.Linear(config.hidden_dim, config.hidden_dim) for _ in range(config.num_layers))
        self.dropout = nn.Dropout(config.dropout_rate)

    def forward(self, features: torch.Tensor, adjacency: torch.Tensor) -> torch.Tensor:
        norm = row_normalize(adjacency)
        hidden = self.input_proj(features)
        for layer in self.layers:
            hidden = self.dropout(F.relu(norm @ F.linear(hidden, layer.weight) + layer.bias))
        return hidden


def gcn_forward(module: GCN, features: torch.Tensor, adjacency: torch.Tensor, train_mode: bool = False) -> torch.Tensor:
    was_training = module.training
    module.train(train_mode)
    try:
        return module(features, adjacency)
    finally:
        module.train(was_training)


def semantic_adjacency(attentions: Sequence[torch.Tensor]) -> torch.Tensor:
    """Head-mean of the final layer's attention; rows stay stochastic."""
    return attentions[-1].mean(dim=-3)
