"""
Semantic channel: a trainable transformer with disentangled attention

Attention scores decompose into content-to-content, content-to-position and
position-to-content terms. Relative distances are clipped to a window of
half-width k and looked up in two learned tables (one on the key side, one on
the query side):

    score(i, j) = Qc_i . Kc_j + Qc_i . Kr[b(i, j)] + Kc_j . Qr[b(j, i)]

scaled by 1/sqrt(3 * head_dim). Layers are post-norm (residual, then
LayerNorm). Weights are randomly initialised; no checkpoint is loaded.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import torch
import torch.nn.functional as F
from torch import nn

from .config import EncoderConfig
from .errors import NumericalFault, ShapeFault


def relative_position_bucket(i: int, j: int, k: int) -> int:
    """Clipped signed distance i - j shifted into [0, 2k)."""
    return max(-k, min(i - j, k - 1)) + k


def relative_position_buckets(length: int, k: int, device: Optional[torch.device] = None) -> torch.Tensor:
    positions = torch.arange(length, device=device)
    return (positions[:, None] - positions[None, :]).clamp(-k, k - 1) + k


@dataclass
class EncoderOutput:
    hidden: torch.Tensor
    attentions: Tuple[torch.Tensor, ...]


class DisentangledAttention(nn.Module):
    def __init__(self, config: EncoderConfig, layer_index: int = 0):
        super().__init__()
        self.num_heads = config.num_heads
        self.head_dim = config.head_dim
        self.k = config.max_rel_distance
        self.layer_index = layer_index

        self.query = nn.Linear(config.hidden_dim, config.hidden_dim)
        self.key = nn.Linear(config.hidden_dim, config.hidden_dim)
        self.value = nn.Linear(config.hidden_dim, config.hidden_dim)
        self.output = nn.Linear(config.hidden_dim, config.hidden_dim)
        self.rel_key = nn.Parameter(torch.empty(2 * self.k, config.hidden_dim))
        self.rel_query = nn.Parameter(torch.empty(2 * self.k, config.hidden_dim))
        self.dropout = nn.Dropout(config.dropout_rate)

    def _split_heads(self, x: torch.Tensor) -> torch.Tensor:
        batch, length, _ = x.shape
        return x.view(batch, length, self.num_heads, self.head_dim).transpose(1, 2)

    def _relative_table(self, table: torch.Tensor) -> torch.Tensor:
        return table.view(2 * self.k, self.num_heads, self.head_dim).transpose(0, 1)

    def _check_finite(self, scores: torch.Tensor) -> None:
        finite = torch.isfinite(scores)
        if not bool(finite.all()):
            head = int((~finite).nonzero()[0, 1])
            raise NumericalFault(
                "non-finite attention scores",
                location=f"layer={self.layer_index} head={head}",
            )

    def forward(
        self, hidden: torch.Tensor, mask: Optional[torch.Tensor] = None
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        """
        Args:
            hidden: (batch, length, hidden_dim)
            mask: (batch, length) bool, True for real tokens

        Returns:
            Updated features (batch, length, hidden_dim) and attention
            probabilities (batch, heads, length, length)
        """
        batch, length, _ = hidden.shape
        qc = self._split_heads(self.query(hidden))
        kc = self._split_heads(self.key(hidden))
        v = self._split_heads(self.value(hidden))
        kr = self._relative_table(self.rel_key)
        qr = self._relative_table(self.rel_query)

        index = relative_position_buckets(length, self.k, hidden.device).expand(batch, self.num_heads, length, length)
        c2c = qc @ kc.transpose(-1, -2)
        c2p = torch.gather(qc @ kr.transpose(-1, -2), -1, index)
        p2c = torch.gather(kc @ qr.transpose(-1, -2), -1, index).transpose(-1, -2)

        scores = (c2c + c2p + p2c) / math.sqrt(3 * self.head_dim)
        self._check_finite(scores)
        if mask is not None:
            scores = scores.masked_fill(~mask[:, None, None, :], torch.finfo(scores.dtype).min)

        probs = torch.softmax(scores, dim=-1)
        context = (self.dropout(probs) @ v).transpose(1, 2).reshape(batch, length, -1)
        return self.output(context), probs


class EncoderLayer(nn.Module):
    def __init__(self, config: EncoderConfig, layer_index: int = 0):
        super().__init__()
        self.attention = DisentangledAttention(config, layer_index)
        self.attention_norm = nn.LayerNorm(config.hidden_dim, eps=config.layer_norm_eps)
        self.ffn_in = nn.Linear(config.hidden_dim, config.ffn_dim)
        self.ffn_out = nn.Linear(config.ffn_dim, config.hidden_dim)
        self.ffn_norm = nn.LayerNorm(config.hidden_dim, eps=config.layer_norm_eps)
        self.dropout = nn.Dropout(config.dropout_rate)

    def forward(self, hidden: torch.Tensor, mask: Optional[torch.Tensor] = None) -> Tuple[torch.Tensor, torch.Tensor]:
        attended, probs = self.attention(hidden, mask)
        hidden = self.attention_norm(hidden + attended)
        ffn = self.dropout(self.ffn_out(F.gelu(self.ffn_in(hidden))))
        return self.ffn_norm(hidden + ffn), probs


class Encoder(nn.Module):
    """Token embeddings followed by num_layers disentangled-attention layers."""

    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.config = config
        self.word_embeddings = nn.Embedding(config.vocab_size, config.hidden_dim)
        self.embedding_norm = nn.LayerNorm(config.hidden_dim, eps=config.layer_norm_eps)
        self.dropout = nn.Dropout(config.dropout_rate)
        self.layers = nn.ModuleList(EncoderLayer(config, i) for i in range(config.num_layers))

    def embed(self, token_ids: torch.Tensor) -> torch.Tensor:
        if token_ids.numel() and int(token_ids.max()) >= self.config.vocab_size:
            raise ShapeFault(f"token id {int(token_ids.max())} >= vocab_size {self.config.vocab_size}")
        if token_ids.shape[-1] > self.config.max_len:
            raise ShapeFault(f"sequence length {token_ids.shape[-1]} exceeds max_len {self.config.max_len}")
        return self.word_embeddings(token_ids)

    def forward_embeddings(self, embeddings: torch.Tensor, mask: Optional[torch.Tensor] = None) -> EncoderOutput:
        hidden = self.dropout(self.embedding_norm(embeddings))
        attentions: List[torch.Tensor] = []
        for layer in self.layers:
            hidden, probs = layer(hidden, mask)
            attentions.append(probs)
        return EncoderOutput(hidden=hidden, attentions=tuple(attentions))

    def forward(self, token_ids: torch.Tensor, mask: Optional[torch.Tensor] = None) -> EncoderOutput:
        return self.forward_embeddings(self.embed(token_ids), mask)


def encode(
    encoder: Encoder, token_ids: Sequence[int], train_mode: bool = False
) -> Tuple[torch.Tensor, List[torch.Tensor]]:
    """
    Encode one unpadded sentence

    Returns:
        Final features (length, hidden_dim) and per-layer attention maps (heads, length, length)
    """
    was_training = encoder.training
    encoder.train(train_mode)
    try:
        ids = torch.as_tensor(list(token_ids), dtype=torch.long).unsqueeze(0)
        output = encoder(ids)
    finally:
        encoder.train(was_training)
    return output.hidden[0], [a[0] for a in output.attentions]


def init_params(module: nn.Module, seed: int) -> nn.Module:
    """
    Deterministic initialisation for any module tree

    Weight matrices and tables ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) with fan_in
    the trailing dimension; biases and LayerNorm offsets are 0, LayerNorm
    gains are 1.
    """
    generator = torch.Generator().manual_seed(seed)
    norm_params = set()
    with torch.no_grad():
        for sub in module.modules():
            if isinstance(sub, nn.LayerNorm):
                sub.weight.fill_(1.0)
                sub.bias.zero_()
                norm_params.update({id(sub.weight), id(sub.bias)})
        for name, param in module.named_parameters():
            if id(param) in norm_params:
                continue
            if param.dim() < 2:
                param.zero_()
                continue
            bound = 1.0 / math.sqrt(param.shape[-1])
            sample = torch.rand(param.shape, generator=generator, dtype=torch.float64)
            param.copy_((sample * 2.0 - 1.0) * bound)
    return module


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())
