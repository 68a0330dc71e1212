"""
Syntactic channel: BiLSTM over the shared token embeddings, and the
dependency adjacency consumed by the syntactic GCN.
"""

from typing import Optional, Sequence

import torch
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from .config import LstmConfig
from .corpus import ROOT, Sentence
from .errors import NumericalFault, ValidationError


class BiLstmEncoder(nn.Module):
    """Stacked bidirectional LSTM; output width is 2 * hidden_per_direction."""

    def __init__(self, input_dim: int, config: LstmConfig):
        super().__init__()
        self.config = config
        self.lstm = nn.LSTM(
            input_size=input_dim,
            hidden_size=config.hidden_per_direction,
            num_layers=config.num_layers,
            batch_first=True,
            bidirectional=True,
            dropout=config.dropout_rate if config.num_layers > 1 else 0.0,
        )

    @property
    def output_dim(self) -> int:
        return self.config.output_dim

    def forward(self, embeddings: torch.Tensor, lengths: Optional[torch.Tensor] = None) -> torch.Tensor:
        """
        Args:
            embeddings: (batch, length, input_dim)
            lengths: (batch,) real lengths; positions past them are ignored

        Returns:
            (batch, length, 2 * hidden_per_direction), zero at padded positions
        """
        total = embeddings.shape[1]
        if lengths is None:
            output, _ = self.lstm(embeddings)
        else:
            packed = pack_padded_sequence(embeddings, lengths.cpu(), batch_first=True, enforce_sorted=False)
            packed_out, _ = self.lstm(packed)
            output, _ = pad_packed_sequence(packed_out, batch_first=True, total_length=total)
        if not bool(torch.isfinite(output).all()):
            raise NumericalFault("non-finite BiLSTM activations", location="bilstm")
        return output


def bilstm_encode(module: BiLstmEncoder, embeddings: torch.Tensor, train_mode: bool = False) -> torch.Tensor:
    """Run one unpadded (length, input_dim) sequence through the BiLSTM."""
    was_training = module.training
    module.train(train_mode)
    try:
        return module(embeddings.unsqueeze(0))[0]
    finally:
        module.train(was_training)


def heads_adjacency(heads: Optional[Sequence[int]], length: int, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    adjacency = torch.eye(length, dtype=dtype)
    if heads is None:
        if length > 1:
            idx = torch.arange(length - 1)
            adjacency[idx, idx + 1] = 1.0
            adjacency[idx + 1, idx] = 1.0
        return adjacency
    if len(heads) != length:
        raise ValidationError(f"dep_heads has {len(heads)} entries for {length} tokens")
    for child, head in enumerate(heads):
        if head == ROOT:
            continue
        adjacency[child, head] = 1.0
        adjacency[head, child] = 1.0
    return adjacency


def build_dep_adjacency(sentence: Sentence, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """
    Undirected dependency graph with self-loops

    Sentences without heads fall back to a linear chain.
    """
    return heads_adjacency(sentence.dep_heads, len(sentence.tokens), dtype)
