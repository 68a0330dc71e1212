"""
Heterogeneous feature interaction

Sigmoid-gated convex fusion of the syntactic and semantic channel features,
plus the KL term that pulls the two channels' token distributions together.
"""

from typing import Optional

import torch
import torch.nn.functional as F
from torch import nn

from .errors import ShapeFault
from .literals import KlDirection


def fuse(h_syn: torch.Tensor, h_sem: torch.Tensor, weight: torch.Tensor, bias: torch.Tensor) -> torch.Tensor:
    """
    out_t = g_t * h_syn_t + (1 - g_t) * h_sem_t, g_t = sigmoid(W [h_syn_t; h_sem_t] + b)
    """
    if h_syn.shape != h_sem.shape:
        raise ShapeFault(f"channel shapes differ: {tuple(h_syn.shape)} vs {tuple(h_sem.shape)}")
    gate = torch.sigmoid(F.linear(torch.cat([h_syn, h_sem], dim=-1), weight, bias))
    return gate * h_syn + (1.0 - gate) * h_sem


class GatedFusion(nn.Module):
    def __init__(self, dim: int):
        super().__init__()
        self.gate = nn.Linear(2 * dim, dim)

    def forward(self, h_syn: torch.Tensor, h_sem: torch.Tensor) -> torch.Tensor:
        return fuse(h_syn, h_sem, self.gate.weight, self.gate.bias)


def channel_kl(
    h_syn: torch.Tensor,
    h_sem: torch.Tensor,
    mask: Optional[torch.Tensor] = None,
    direction: KlDirection = "sem_to_syn",
) -> torch.Tensor:
    """
    Mean over tokens of KL(softmax(h_sem_t) || softmax(h_syn_t))

    ``direction="syn_to_sem"`` swaps the roles. ``mask`` (same leading shape,
    True for real tokens) excludes padding from the mean.
    """
    if h_syn.shape != h_sem.shape:
        raise ShapeFault(f"channel shapes differ: {tuple(h_syn.shape)} vs {tuple(h_sem.shape)}")
    target, source = (h_sem, h_syn) if direction == "sem_to_syn" else (h_syn, h_sem)
    per_token = F.kl_div(
        F.log_softmax(source, dim=-1),
        F.log_softmax(target, dim=-1),
        reduction="none",
        log_target=True,
    ).sum(dim=-1).clamp_min(0.0)
    if mask is None:
        return per_token.mean()
    weights = mask.to(per_token.dtype)
    return (per_token * weights).sum() / weights.sum().clamp_min(1.0)
